//! The G² likelihood-ratio statistic with the "five per cell" stratum rule.

use serde::Serialize;

use crate::data::ContingencyTable;
use crate::error::{Error, Result};

/// Minimum count required in every joint cell of a stratum.
pub const MIN_CELL: u64 = 5;

/// Outcome of a test decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Independent,
    Dependent,
}

/// G² statistic, degrees of freedom and decision for one CI statement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestResult {
    pub g: f64,
    pub df: usize,
    /// Critical value; `None` when no stratum was usable.
    pub critical: Option<f64>,
    pub n_valid_strata: usize,
    pub decision: Decision,
}

/// G² for X and Y given every other variable of `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GStat {
    pub g: f64,
    pub df: usize,
    pub n_valid_strata: usize,
}

/// Computes G(X, Y; S) where S is every variable of `t` other than `x`, `y`.
///
/// The sum runs over conditioning states in ascending variable-id order with
/// the smaller of `x`, `y` as the row variable, so the value is bit-identical
/// under swapping `x`/`y` and under any ordering of `t`'s variables.
pub fn g_statistic(t: &ContingencyTable, x: usize, y: usize) -> Result<GStat> {
    if x == y {
        return Err(Error::Argument("G statistic needs two distinct variables".into()));
    }
    let (a, b) = (x.min(y), x.max(y));
    let mut order = vec![a, b];
    let mut cond: Vec<usize> = t.vars().iter().copied().filter(|&v| v != a && v != b).collect();
    cond.sort_unstable();
    order.extend(&cond);
    let t = t.marginalize(&order)?;
    let dims = t.dims();
    let (na, nb) = (dims[0], dims[1]);
    let n_strata: usize = dims[2..].iter().product();
    let counts = t.counts();

    let mut g = 0.0;
    let mut valid = 0;
    let mut row = vec![0u64; na];
    let mut col = vec![0u64; nb];
    for s in 0..n_strata {
        let cell = |i: usize, j: usize| counts[(i * nb + j) * n_strata + s];
        let mut ok = true;
        'scan: for i in 0..na {
            for j in 0..nb {
                if cell(i, j) < MIN_CELL {
                    ok = false;
                    break 'scan;
                }
            }
        }
        if !ok {
            continue;
        }
        valid += 1;
        row.iter_mut().for_each(|r| *r = 0);
        col.iter_mut().for_each(|c| *c = 0);
        let mut ns = 0u64;
        for i in 0..na {
            for j in 0..nb {
                let n = cell(i, j);
                row[i] += n;
                col[j] += n;
                ns += n;
            }
        }
        let mut stratum = 0.0;
        for i in 0..na {
            for j in 0..nb {
                let n = cell(i, j) as f64;
                stratum += n * (n * ns as f64 / (row[i] as f64 * col[j] as f64)).ln();
            }
        }
        g += 2.0 * stratum;
    }
    let df = valid * (na - 1) * (nb - 1);
    Ok(GStat { g: g.max(0.0), df, n_valid_strata: valid })
}

/// Applies the decision rule at level `alpha` to a computed statistic.
pub fn decide(stat: GStat, alpha: f64) -> Result<TestResult> {
    if stat.n_valid_strata == 0 || stat.df == 0 {
        return Ok(TestResult {
            g: stat.g,
            df: stat.df,
            critical: None,
            n_valid_strata: stat.n_valid_strata,
            decision: Decision::Dependent,
        });
    }
    let critical = super::chi2::chi2_quantile(stat.df, 1.0 - alpha)?;
    let decision = if stat.g <= critical { Decision::Independent } else { Decision::Dependent };
    Ok(TestResult { g: stat.g, df: stat.df, critical: Some(critical), n_valid_strata: stat.n_valid_strata, decision })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{counts, CallMeter, Dataset};

    fn dataset_from_cells(cells: &[(u32, u32, u64)]) -> Dataset {
        let mut rows = Vec::new();
        for &(a, b, n) in cells {
            for _ in 0..n {
                rows.push(vec![a, b]);
            }
        }
        Dataset::from_rows(vec!["x".into(), "y".into()], vec![2, 2], &rows).unwrap()
    }

    #[test]
    fn proportional_table_is_zero() {
        let ds = dataset_from_cells(&[(0, 0, 10), (0, 1, 20), (1, 0, 30), (1, 1, 60)]);
        let t = counts(&ds, &[0, 1], &CallMeter::new()).unwrap();
        let s = g_statistic(&t, 0, 1).unwrap();
        assert!(s.g.abs() < 1e-12);
        assert_eq!((s.df, s.n_valid_strata), (1, 1));
    }

    #[test]
    fn two_by_two_matches_hand_computation() {
        // Expected counts are all 25; G = 2 * sum n ln(n / 25).
        let ds = dataset_from_cells(&[(0, 0, 30), (0, 1, 20), (1, 0, 20), (1, 1, 30)]);
        let t = counts(&ds, &[0, 1], &CallMeter::new()).unwrap();
        let want = 2.0 * (2.0 * 30.0 * (30.0f64 / 25.0).ln() + 2.0 * 20.0 * (20.0f64 / 25.0).ln());
        assert!((g_statistic(&t, 0, 1).unwrap().g - want).abs() < 1e-12);
    }

    #[test]
    fn sparse_stratum_is_dependent() {
        let ds = dataset_from_cells(&[(0, 0, 30), (0, 1, 4), (1, 0, 20), (1, 1, 30)]);
        let t = counts(&ds, &[0, 1], &CallMeter::new()).unwrap();
        let s = g_statistic(&t, 0, 1).unwrap();
        assert_eq!((s.df, s.n_valid_strata), (0, 0));
        let r = decide(s, 0.05).unwrap();
        assert_eq!(r.decision, Decision::Dependent);
        assert!(r.critical.is_none());
    }

    #[test]
    fn same_variable_rejected() {
        let ds = dataset_from_cells(&[(0, 0, 5)]);
        let t = counts(&ds, &[0, 1], &CallMeter::new()).unwrap();
        assert!(g_statistic(&t, 1, 1).is_err());
    }
}
