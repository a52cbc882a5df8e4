#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;

use essograph::citest::{CiSource, Decision};
use essograph::data::{load_table, Dataset, MeterSnapshot};
use essograph::graph::{d_separated, Dag};
use essograph::Result;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

/// The 1190-row Women and Mathematics data, columns A..F.
pub fn wam() -> Dataset {
    load_table(std::fs::File::open(fixture("wam.csv")).unwrap()).unwrap()
}

/// Column index of a WAM variable letter.
pub fn v(name: char) -> usize {
    (name as u8 - b'A') as usize
}

pub fn set(names: &str) -> BTreeSet<usize> {
    names.chars().map(v).collect()
}

pub fn letters(s: &[usize]) -> String {
    s.iter().map(|&k| (b'A' + k as u8) as char).collect()
}

/// A d-separation oracle whose answers are flipped for a pseudo-random
/// fraction of statements, giving statement sets with no faithful DAG.
pub struct PerturbedOracle {
    pub dag: Dag,
    pub max_cond: usize,
    pub flip_rate: f64,
    pub seed: u64,
    calls: u64,
}

impl PerturbedOracle {
    pub fn new(dag: Dag, max_cond: usize, flip_rate: f64, seed: u64) -> Self {
        PerturbedOracle { dag, max_cond, flip_rate, seed, calls: 0 }
    }

    fn flipped(&self, i: usize, j: usize, cond: &[usize]) -> bool {
        let mut s = cond.to_vec();
        s.sort_unstable();
        let mut h: u64 = self.seed ^ 0x51_7c_c1_b7_27_22_0a_95;
        for x in [i.min(j), i.max(j), usize::MAX].into_iter().chain(s) {
            h ^= x as u64;
            h = h.wrapping_mul(0x100_0000_01b3);
            h ^= h >> 29;
        }
        (h % 1_000_000) as f64 / 1_000_000.0 < self.flip_rate
    }
}

impl CiSource for PerturbedOracle {
    fn n_vars(&self) -> usize {
        self.dag.n()
    }

    fn max_cond(&self) -> usize {
        self.max_cond
    }

    fn determine(&mut self, i: usize, j: usize, cond: &[usize]) -> Result<Decision> {
        if cond.len() > self.max_cond {
            return Ok(Decision::Dependent);
        }
        self.calls += 1;
        let sep = d_separated(&self.dag, i, j, cond)? ^ self.flipped(i, j, cond);
        Ok(if sep { Decision::Independent } else { Decision::Dependent })
    }

    fn meter(&self) -> MeterSnapshot {
        MeterSnapshot { data_calls: 0, test_calls: self.calls }
    }
}

/// Every DAG on `n` labelled nodes.
pub fn all_dags(n: usize) -> Vec<Dag> {
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
    let mut out = Vec::new();
    let total = 3usize.pow(pairs.len() as u32);
    for code in 0..total {
        let mut c = code;
        let mut edges = Vec::new();
        for &(a, b) in &pairs {
            match c % 3 {
                1 => edges.push((a, b)),
                2 => edges.push((b, a)),
                _ => {}
            }
            c /= 3;
        }
        if let Ok(d) = Dag::from_edges(n, &edges) {
            out.push(d);
        }
    }
    out
}
