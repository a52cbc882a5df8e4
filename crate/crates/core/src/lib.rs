//! Learning essential graphs of Bayesian networks from categorical data.
//!
//! The main entry point is [`learner::run_m3pc`], which drives a
//! [`citest::CiSource`] (usually a [`citest::DataCi`] over a [`data::Dataset`])
//! through skeleton and immorality discovery, then orients the result with
//! [`orient::close`] and, if the statements had no faithful graph,
//! [`orient::repair`].

pub mod citest;
pub mod data;
pub mod error;
pub mod graph;
pub mod learner;
pub mod orient;
pub mod synth;

pub use error::{Error, Result};
