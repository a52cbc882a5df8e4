//! Conditional-independence testing: the G² statistic, chi-square quantiles
//! and the consistency-checked decision ledger.

pub mod chi2;
pub mod gstat;
pub mod ledger;

pub use chi2::{chi2_cdf, chi2_quantile};
pub use gstat::{decide, g_statistic, Decision, GStat, TestResult};
pub use ledger::{audit_closure, subsets_of_size, CiKey, CiLedger, CiSource, CiValue, DataCi, LedgerEntry, Violation};
