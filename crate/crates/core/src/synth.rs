//! Synthetic experiments: random DAGs, random parameters, forward sampling,
//! a perfect d-separation CI source and structural accuracy measures.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::Serialize;

use crate::citest::{CiSource, Decision};
use crate::data::{Dataset, MeterSnapshot};
use crate::error::{Error, Result};
use crate::graph::{d_separated, essential_graph_of, immoralities, Dag, MixedGraph};
use crate::learner::{self, Algorithm, LearnerConfig};

/// A random DAG: nodes are put in a random order, and each earlier node
/// becomes a parent with probability `edge_prob`, up to `max_parents`.
pub fn random_dag(d: usize, edge_prob: f64, max_parents: usize, seed: u64) -> Dag {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..d).collect();
    order.shuffle(&mut rng);
    let mut g = MixedGraph::new(d);
    for pos in 1..d {
        let child = order[pos];
        let mut candidates = order[..pos].to_vec();
        candidates.shuffle(&mut rng);
        let mut added = 0;
        for parent in candidates {
            if added >= max_parents {
                break;
            }
            if rng.random::<f64>() < edge_prob {
                g.set_directed(parent, child);
                added += 1;
            }
        }
    }
    Dag::from_graph(g).expect("edges follow a topological order")
}

/// Conditional distribution of one node. Row `r` corresponds to the parent
/// configuration with the first parent varying slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeCpt {
    pub parents: Vec<usize>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cpts {
    pub cardinalities: Vec<usize>,
    pub nodes: Vec<NodeCpt>,
}

impl Cpts {
    fn row_index(&self, v: usize, state: &[u32]) -> usize {
        self.nodes[v].parents.iter().fold(0, |acc, &p| acc * self.cardinalities[p] + state[p] as usize)
    }
}

/// Draws every CPT row from a symmetric Dirichlet with the given
/// concentration (normalised gamma draws). Small concentrations give
/// near-deterministic rows and strong dependence.
pub fn sample_cpts(dag: &Dag, cardinalities: &[usize], concentration: f64, seed: u64) -> Result<Cpts> {
    if cardinalities.len() != dag.n() || cardinalities.contains(&0) {
        return Err(Error::Argument("one positive cardinality per node is required".into()));
    }
    let gamma = Gamma::new(concentration, 1.0).map_err(|e| Error::Argument(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nodes = (0..dag.n())
        .map(|v| {
            let parents = dag.parents(v);
            let n_rows: usize = parents.iter().map(|&p| cardinalities[p]).product();
            let rows = (0..n_rows)
                .map(|_| {
                    let mut row: Vec<f64> = (0..cardinalities[v]).map(|_| gamma.sample(&mut rng)).collect();
                    let sum: f64 = row.iter().sum();
                    if sum > 0.0 && sum.is_finite() {
                        row.iter_mut().for_each(|p| *p /= sum);
                    } else {
                        let hot = rng.random_range(0..row.len());
                        row.iter_mut().enumerate().for_each(|(k, p)| *p = if k == hot { 1.0 } else { 0.0 });
                    }
                    row
                })
                .collect();
            NodeCpt { parents, rows }
        })
        .collect();
    Ok(Cpts { cardinalities: cardinalities.to_vec(), nodes })
}

/// Draws `n` rows by ancestral sampling. Variables are named `X1`, `X2`, ….
pub fn forward_sample(dag: &Dag, cpts: &Cpts, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::Argument("cannot sample zero rows".into()));
    }
    if cpts.nodes.len() != dag.n() {
        return Err(Error::Argument("CPTs do not match the DAG".into()));
    }
    let order = dag.topological_order();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    let mut state = vec![0u32; dag.n()];
    for _ in 0..n {
        for &v in &order {
            let row = &cpts.nodes[v].rows[cpts.row_index(v, &state)];
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut pick = row.len() - 1;
            for (k, &p) in row.iter().enumerate() {
                acc += p;
                if u < acc {
                    pick = k;
                    break;
                }
            }
            state[v] = pick as u32;
        }
        rows.push(state.clone());
    }
    let names = (1..=dag.n()).map(|k| format!("X{k}")).collect();
    Dataset::from_rows(names, cpts.cardinalities.clone(), &rows)
}

/// Answers CI queries by d-separation in a known DAG.
#[derive(Debug, Clone)]
pub struct DSeparationOracle {
    dag: Dag,
    max_cond: usize,
    calls: u64,
}

impl DSeparationOracle {
    pub fn new(dag: Dag, max_cond: usize) -> Self {
        DSeparationOracle { dag, max_cond, calls: 0 }
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }
}

/// A faithful CI source for `dag` with no limit on conditioning-set size.
pub fn oracle_ledger(dag: &Dag) -> DSeparationOracle {
    DSeparationOracle::new(dag.clone(), usize::MAX)
}

impl CiSource for DSeparationOracle {
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
        Ok(if d_separated(&self.dag, i, j, cond)? { Decision::Independent } else { Decision::Dependent })
    }

    fn meter(&self) -> MeterSnapshot {
        MeterSnapshot { data_calls: 0, test_calls: self.calls }
    }
}

/// Structural differences between a learned graph and the essential graph
/// of the true DAG.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct StructDiff {
    pub extra_edges: usize,
    pub missing_edges: usize,
    pub immorality_diff: usize,
    /// Edges present in both whose mark (direction or lack of it) differs.
    pub directed_mismatches: usize,
}

impl StructDiff {
    pub fn is_zero(&self) -> bool {
        *self == StructDiff::default()
    }
}

pub fn struct_diff(learned: &MixedGraph, truth: &Dag) -> Result<StructDiff> {
    if learned.n() != truth.n() {
        return Err(Error::Argument("graphs have different node counts".into()));
    }
    let target = essential_graph_of(truth);
    let mut diff = StructDiff::default();
    for a in 0..target.n() {
        for b in a + 1..target.n() {
            match (learned.adjacent(a, b), target.adjacent(a, b)) {
                (true, false) => diff.extra_edges += 1,
                (false, true) => diff.missing_edges += 1,
                (true, true) => {
                    let same = (learned.has_directed(a, b) == target.has_directed(a, b))
                        && (learned.has_directed(b, a) == target.has_directed(b, a));
                    if !same {
                        diff.directed_mismatches += 1;
                    }
                }
                (false, false) => {}
            }
        }
    }
    let li = immoralities(learned);
    let ti = immoralities(&target);
    diff.immorality_diff = li.symmetric_difference(&ti).count();
    Ok(diff)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Learn from sampled data.
    Data,
    /// Learn from d-separation in the true DAG.
    Oracle,
}

/// Settings for a batch of synthetic trials.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub trials: usize,
    pub d: usize,
    pub n: usize,
    pub edge_prob: f64,
    pub max_parents: usize,
    pub cardinality: usize,
    pub concentration: f64,
    pub alpha: f64,
    pub max_cond: usize,
    pub consistency: bool,
    pub algorithm: Algorithm,
    pub mode: Mode,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            trials: 10,
            d: 6,
            n: 2000,
            edge_prob: 0.3,
            max_parents: 3,
            cardinality: 2,
            concentration: 0.5,
            alpha: 0.05,
            max_cond: 3,
            consistency: true,
            algorithm: Algorithm::M3pc,
            mode: Mode::Data,
            seed: 1,
        }
    }
}

impl ExperimentConfig {
    /// Parses `key = value` lines; `#` starts a comment. Unknown keys and
    /// malformed values are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) =
                line.split_once('=').ok_or_else(|| Error::Config(format!("line {}: expected key = value", no + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            let bad = || Error::Config(format!("line {}: bad value {value:?} for {key}", no + 1));
            match key {
                "trials" => cfg.trials = value.parse().map_err(|_| bad())?,
                "d" => cfg.d = value.parse().map_err(|_| bad())?,
                "n" => cfg.n = value.parse().map_err(|_| bad())?,
                "edge_prob" => cfg.edge_prob = value.parse().map_err(|_| bad())?,
                "max_parents" => cfg.max_parents = value.parse().map_err(|_| bad())?,
                "cardinality" => cfg.cardinality = value.parse().map_err(|_| bad())?,
                "concentration" => cfg.concentration = value.parse().map_err(|_| bad())?,
                "alpha" => cfg.alpha = value.parse().map_err(|_| bad())?,
                "max_cond" => cfg.max_cond = value.parse().map_err(|_| bad())?,
                "consistency" => cfg.consistency = value.parse().map_err(|_| bad())?,
                "algorithm" => cfg.algorithm = value.parse().map_err(|_| bad())?,
                "mode" => {
                    cfg.mode = match value {
                        "data" => Mode::Data,
                        "oracle" => Mode::Oracle,
                        _ => return Err(bad()),
                    }
                }
                "seed" => cfg.seed = value.parse().map_err(|_| bad())?,
                other => return Err(Error::Config(format!("line {}: unknown key {other:?}", no + 1))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.edge_prob) {
            return Err(Error::Config("edge_prob must lie in [0, 1]".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config("alpha must lie in (0, 1)".into()));
        }
        if self.cardinality < 2 {
            return Err(Error::Config("cardinality must be at least 2".into()));
        }
        if self.concentration <= 0.0 {
            return Err(Error::Config("concentration must be positive".into()));
        }
        if self.mode == Mode::Data && self.n == 0 && self.trials > 0 {
            return Err(Error::Config("n must be positive in data mode".into()));
        }
        Ok(())
    }
}

/// Result of one trial, written as one JSON line.
#[derive(Debug, Clone, Serialize)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    pub d: usize,
    pub true_edges: usize,
    pub diff: Option<StructDiff>,
    pub meter: Option<MeterSnapshot>,
    pub repaired: bool,
    pub valid: bool,
    pub error: Option<String>,
}

fn run_trial(cfg: &ExperimentConfig, trial: usize) -> TrialResult {
    let seed = cfg.seed.wrapping_add(trial as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    let dag = random_dag(cfg.d, cfg.edge_prob, cfg.max_parents, seed);
    let mut result = TrialResult {
        trial,
        seed,
        d: cfg.d,
        true_edges: dag.edges().len(),
        diff: None,
        meter: None,
        repaired: false,
        valid: false,
        error: None,
    };
    let outcome = match cfg.mode {
        Mode::Oracle => {
            let mut oracle = DSeparationOracle::new(dag.clone(), cfg.max_cond);
            learner::run(&mut oracle, cfg.algorithm, 0)
        }
        Mode::Data => {
            let cards = vec![cfg.cardinality; cfg.d];
            sample_cpts(&dag, &cards, cfg.concentration, seed ^ 1)
                .and_then(|cpts| forward_sample(&dag, &cpts, cfg.n, seed ^ 2))
                .and_then(|ds| {
                    let lc = LearnerConfig {
                        alpha: cfg.alpha,
                        max_cond: cfg.max_cond,
                        consistency: cfg.consistency,
                        algorithm: cfg.algorithm,
                        ..LearnerConfig::default()
                    };
                    learner::learn(&ds, &lc).map(|(o, _)| o)
                })
        }
    };
    match outcome {
        Ok(o) => {
            result.diff = struct_diff(&o.graph, &dag).ok();
            result.meter = Some(o.report.meter);
            result.repaired = !o.report.repair_log.is_empty();
            result.valid = crate::graph::validate_essential(&o.graph).is_valid();
        }
        Err(e) => result.error = Some(e.to_string()),
    }
    result
}

/// Runs every trial (in parallel) and returns results in trial order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Vec<TrialResult> {
    (0..cfg.trials).into_par_iter().map(|t| run_trial(cfg, t)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dag_extremes() {
        assert!(random_dag(5, 0.0, 5, 1).edges().is_empty());
        assert_eq!(random_dag(5, 1.0, 5, 1).edges().len(), 10);
        assert_eq!(random_dag(6, 0.5, 2, 9), random_dag(6, 0.5, 2, 9));
        let capped = random_dag(8, 1.0, 2, 3);
        assert!((0..8).all(|v| capped.parents(v).len() <= 2));
    }

    #[test]
    fn cpt_rows_are_distributions() {
        let dag = random_dag(5, 0.6, 3, 4);
        let cpts = sample_cpts(&dag, &[2, 3, 2, 4, 2], 0.3, 5).unwrap();
        for node in &cpts.nodes {
            for row in &node.rows {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn deterministic_rows_force_values() {
        let dag = Dag::from_edges(2, &[(0, 1)]).unwrap();
        let cpts = Cpts {
            cardinalities: vec![2, 2],
            nodes: vec![
                NodeCpt { parents: vec![], rows: vec![vec![0.5, 0.5]] },
                NodeCpt { parents: vec![0], rows: vec![vec![0.0, 1.0], vec![1.0, 0.0]] },
            ],
        };
        let ds = forward_sample(&dag, &cpts, 200, 3).unwrap();
        for r in 0..ds.n_rows() {
            assert_eq!(ds.column(1)[r], 1 - ds.column(0)[r]);
        }
        assert!(forward_sample(&dag, &cpts, 0, 3).is_err());
    }

    #[test]
    fn oracle_answers() {
        let mut collider = oracle_ledger(&Dag::from_edges(3, &[(0, 1), (2, 1)]).unwrap());
        assert_eq!(collider.determine(0, 2, &[]).unwrap(), Decision::Independent);
        assert_eq!(collider.determine(0, 2, &[1]).unwrap(), Decision::Dependent);
        let mut chain = oracle_ledger(&Dag::from_edges(3, &[(0, 1), (1, 2)]).unwrap());
        assert_eq!(chain.determine(0, 2, &[1]).unwrap(), Decision::Independent);
    }

    #[test]
    fn diff_against_truth() {
        let truth = random_dag(6, 0.5, 3, 11);
        assert!(struct_diff(&essential_graph_of(&truth), &truth).unwrap().is_zero());
        let five = Dag::from_edges(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)]).unwrap();
        let d = struct_diff(&MixedGraph::new(6), &five).unwrap();
        assert_eq!((d.missing_edges, d.extra_edges), (5, 0));
    }

    #[test]
    fn config_parsing() {
        let cfg = ExperimentConfig::parse("trials = 3\nd=4 # comment\nmode = oracle\n").unwrap();
        assert_eq!((cfg.trials, cfg.d, cfg.mode), (3, 4, Mode::Oracle));
        assert!(ExperimentConfig::parse("colour = blue\n").is_err());
        assert!(ExperimentConfig::parse("d = many\n").is_err());
    }
}
