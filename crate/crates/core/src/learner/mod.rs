//! Skeleton and immorality discovery, and the full learning pipeline.

pub mod stages;

use serde::Serialize;

use crate::citest::{CiLedger, CiSource, DataCi};
use crate::data::{Dataset, MeterSnapshot, TableStore, DEFAULT_CELL_BUDGET};
use crate::error::{Error, Result};
use crate::graph::{immoralities, validate_essential, ImmoralitySet, MixedGraph};
use crate::orient::{self, RepairLog};

pub use stages::{NeighborSets, SepsetRecord, SepsetStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    /// Original skeleton search, with immoralities read off the separating
    /// sets afterwards.
    Mmpc,
    /// Skeleton search that records immoralities as pairs are separated.
    M3pc,
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mmpc" => Ok(Algorithm::Mmpc),
            "m3pc" => Ok(Algorithm::M3pc),
            other => Err(Error::Config(format!("unknown algorithm {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnerConfig {
    pub alpha: f64,
    pub max_cond: usize,
    pub consistency: bool,
    pub algorithm: Algorithm,
    pub cell_budget: usize,
    /// Tie-break seed for repair; 0 means lexicographic.
    pub seed: u64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            alpha: 0.05,
            max_cond: 3,
            consistency: true,
            algorithm: Algorithm::M3pc,
            cell_budget: DEFAULT_CELL_BUDGET,
            seed: 0,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.cell_budget == 0 {
            return Err(Error::Config("cell budget must be positive".into()));
        }
        Ok(())
    }
}

/// Candidate neighbour sets after one stage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StageSnapshot {
    pub stage: u8,
    pub sets: Vec<Vec<usize>>,
}

fn snapshot(stage: u8, z: &NeighborSets) -> StageSnapshot {
    StageSnapshot { stage, sets: z.iter().map(|s| s.iter().copied().collect()).collect() }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub algorithm: Algorithm,
    pub nodes: Vec<String>,
    pub stages: Vec<StageSnapshot>,
    pub immoralities: Vec<(usize, usize, usize)>,
    pub sepsets: Vec<SepsetRecord>,
    /// Meter after the skeleton stages.
    pub meter_skeleton: MeterSnapshot,
    pub meter: MeterSnapshot,
    pub closure_log: RepairLog,
    pub repair_log: RepairLog,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub graph: MixedGraph,
    /// The assembled graph before orientation closure.
    pub assembled: MixedGraph,
    pub immoralities: ImmoralitySet,
    pub sepsets: SepsetStore,
    pub report: RunReport,
}

/// Skeleton search without immorality bookkeeping: stages 1, 2, 3, 2.
pub fn mmpc_skeleton<C: CiSource + ?Sized>(ci: &mut C) -> Result<(NeighborSets, SepsetStore, Vec<StageSnapshot>)> {
    let (z1, mut sepsets) = stages::stage1(ci)?;
    let z2 = stages::symmetric_prune(&z1, &sepsets, None);
    let z3 = stages::stage3(ci, &z2, &mut sepsets, None)?;
    let z4 = stages::stage4(&z3);
    let snaps = vec![snapshot(1, &z1), snapshot(2, &z2), snapshot(3, &z3), snapshot(4, &z4)];
    Ok((z4, sepsets, snaps))
}

/// Runs the chosen algorithm against any CI source, then orients and, if
/// needed, repairs the result.
pub fn run<C: CiSource + ?Sized>(ci: &mut C, algorithm: Algorithm, seed: u64) -> Result<RunOutcome> {
    let (z, sepsets, snaps, candidates) = match algorithm {
        Algorithm::M3pc => {
            let mut imm = ImmoralitySet::new();
            let (z1, mut sepsets) = stages::stage1(ci)?;
            let z2 = stages::stage2(&z1, &sepsets, &mut imm);
            let z3 = stages::stage3(ci, &z2, &mut sepsets, Some(&mut imm))?;
            let z4 = stages::stage4(&z3);
            let snaps = vec![snapshot(1, &z1), snapshot(2, &z2), snapshot(3, &z3), snapshot(4, &z4)];
            (z4, sepsets, snaps, imm)
        }
        Algorithm::Mmpc => {
            let (z, sepsets, snaps) = mmpc_skeleton(ci)?;
            let imm = stages::vees_from_sepsets(&z, &sepsets);
            (z, sepsets, snaps, imm)
        }
    };
    let meter_skeleton = ci.meter();
    let imm = stages::stage5(ci, &z, &candidates, &sepsets)?;
    let assembled = stages::stage6(&z, &imm);

    let mut graph = assembled.clone();
    let closure_log = RepairLog { actions: orient::close(&mut graph, &imm) };
    let emergent = immoralities(&graph).difference(&imm).next().is_some();
    let repair_log = if emergent || !validate_essential(&graph).is_valid() {
        let (repaired, log) = orient::repair(&graph, &imm, &assembled.skeleton_edges(), seed)?;
        graph = repaired;
        log
    } else {
        RepairLog::default()
    };

    let report = RunReport {
        algorithm,
        nodes: Vec::new(),
        stages: snaps,
        immoralities: imm.iter().copied().collect(),
        sepsets: sepsets.records(),
        meter_skeleton,
        meter: ci.meter(),
        closure_log,
        repair_log,
        seed,
    };
    Ok(RunOutcome { graph, assembled, immoralities: imm, sepsets, report })
}

/// M³PC against any CI source.
pub fn run_m3pc<C: CiSource + ?Sized>(ci: &mut C) -> Result<RunOutcome> {
    run(ci, Algorithm::M3pc, 0)
}

/// Learns from data. Returns the outcome and the ledger of every decision.
pub fn learn(ds: &Dataset, config: &LearnerConfig) -> Result<(RunOutcome, CiLedger)> {
    config.validate()?;
    let ledger = CiLedger::new(config.alpha, config.max_cond, config.consistency);
    let mut ci = DataCi::new(TableStore::new(ds, config.cell_budget), ledger);
    let mut outcome = run(&mut ci, config.algorithm, config.seed)?;
    outcome.report.nodes = ds.names().to_vec();
    Ok((outcome, ci.into_ledger()))
}
