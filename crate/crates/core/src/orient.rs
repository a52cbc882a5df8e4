//! Orientation of strongly protected edges and repair of graphs built from
//! statements that have no faithful DAG.
//!
//! The three forcing structures, each orienting an undirected `w -- y` as
//! `w → y`:
//!
//! 1. `z → w -- y` with `z`, `y` non-adjacent;
//! 2. `w → z → y` with `w -- y`;
//! 3. an immorality `z1 → y ← z2` with `w -- z1`, `w -- z2` and `w -- y`.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::chordal::min_degree_fill_in;
use crate::graph::essential::forcing_structure;
use crate::graph::{immoralities, validate_essential, ImmoralitySet, MixedGraph};

/// One change made to a graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum RepairAction {
    /// The directed edge `edge` of a cycle was reversed to `new_dir`.
    CycleBroken { edge: (usize, usize), new_dir: (usize, usize) },
    /// The directed edge `added_edge` was added to shield `triple`.
    ImmoralityPatched { triple: (usize, usize, usize), added_edge: (usize, usize) },
    /// `edge.0 -- edge.1` became `edge.0 → edge.1` by the given structure.
    EdgeOriented { edge: (usize, usize), structure: u8 },
    /// The undirected edge was added while triangulating.
    FillInAdded { edge: (usize, usize) },
}

/// Ordered record of changes; replaying it reproduces the changed graph.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct RepairLog {
    pub actions: Vec<RepairAction>,
}

impl RepairLog {
    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    /// Applies every action to a copy of `g`.
    pub fn replay(&self, g: &MixedGraph) -> MixedGraph {
        let mut g = g.clone();
        for a in &self.actions {
            match *a {
                RepairAction::CycleBroken { new_dir: (a, b), .. } => g.set_directed(a, b),
                RepairAction::ImmoralityPatched { added_edge: (a, b), .. } => g.set_directed(a, b),
                RepairAction::EdgeOriented { edge: (a, b), .. } => g.set_directed(a, b),
                RepairAction::FillInAdded { edge: (a, b) } => g.set_undirected(a, b),
            }
        }
        g
    }
}

fn orient(g: &mut MixedGraph, w: usize, y: usize, structure: u8, log: &mut Vec<RepairAction>) {
    g.set_directed(w, y);
    log.push(RepairAction::EdgeOriented { edge: (w, y), structure });
}

/// Orients `w → y` for every immorality `(i, y, k)` of `imm` still present
/// in `g` and every `w` joined to `i`, `k` and `y` by undirected edges.
pub fn close_structure3(g: &mut MixedGraph, imm: &ImmoralitySet) -> Vec<RepairAction> {
    let mut log = Vec::new();
    for &(i, y, k) in imm {
        if !(g.has_directed(i, y) && g.has_directed(k, y)) || g.adjacent(i, k) {
            continue;
        }
        for w in 0..g.n() {
            if g.has_undirected(w, i) && g.has_undirected(w, k) && g.has_undirected(w, y) {
                orient(g, w, y, 3, &mut log);
            }
        }
    }
    log
}

fn sweep(g: &mut MixedGraph, structure: u8) -> Vec<RepairAction> {
    let mut log = Vec::new();
    loop {
        let before = log.len();
        for (a, b) in g.undirected_edges() {
            for (w, y) in [(a, b), (b, a)] {
                if !g.has_undirected(w, y) {
                    continue;
                }
                let fires = match structure {
                    1 => g.parents(w).into_iter().any(|z| z != y && !g.adjacent(z, y)),
                    _ => g.children(w).into_iter().any(|z| g.has_directed(z, y)),
                };
                if fires {
                    orient(g, w, y, structure, &mut log);
                }
            }
        }
        if log.len() == before {
            return log;
        }
    }
}

/// Structure 1 to a fixpoint.
pub fn close_structure1(g: &mut MixedGraph) -> Vec<RepairAction> {
    sweep(g, 1)
}

/// Structure 2 to a fixpoint.
pub fn close_structure2(g: &mut MixedGraph) -> Vec<RepairAction> {
    sweep(g, 2)
}

/// Structure 3 over `imm`, then structures 1 and 2 to a joint fixpoint,
/// repeated until nothing changes. Returns the orientations made.
pub fn close(g: &mut MixedGraph, imm: &ImmoralitySet) -> Vec<RepairAction> {
    let mut log = Vec::new();
    loop {
        let before = log.len();
        log.extend(close_structure3(g, imm));
        loop {
            let inner = log.len();
            log.extend(close_structure1(g));
            log.extend(close_structure2(g));
            if log.len() == inner {
                break;
            }
        }
        if log.len() == before {
            return log;
        }
    }
}

fn mix(seed: u64, a: usize, b: usize) -> u64 {
    // splitmix64 finaliser over the seed and the edge.
    let mut z = seed ^ ((a as u64) << 32 | b as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Picks an edge: lexicographically smallest when `seed` is 0, otherwise the
/// smallest under a seed-keyed hash.
fn pick(edges: &[(usize, usize)], seed: u64) -> Option<(usize, usize)> {
    if seed == 0 {
        edges.iter().min().copied()
    } else {
        edges.iter().min_by_key(|&&(a, b)| (mix(seed, a, b), a, b)).copied()
    }
}

/// Chooses a direction for a new edge between `a` and `b` that keeps the
/// directed part acyclic, preferring the smaller index as source.
fn acyclic_direction(g: &MixedGraph, a: usize, b: usize) -> (usize, usize) {
    let (lo, hi) = (a.min(b), a.max(b));
    if !g.has_directed_path(hi, lo) {
        (lo, hi)
    } else if !g.has_directed_path(lo, hi) {
        (hi, lo)
    } else {
        (lo, hi)
    }
}

struct Repairer<'a> {
    g: MixedGraph,
    data_imm: &'a ImmoralitySet,
    fixed: BTreeSet<(usize, usize)>,
    skeleton: BTreeSet<(usize, usize)>,
    seed: u64,
    log: Vec<RepairAction>,
}

impl Repairer<'_> {
    fn new_immoralities(&self) -> Vec<(usize, usize, usize)> {
        immoralities(&self.g).difference(self.data_imm).copied().collect()
    }

    fn patch(&mut self, triple: (usize, usize, usize)) {
        let (x, _, z) = triple;
        let (a, b) = acyclic_direction(&self.g, x, z);
        self.g.set_directed(a, b);
        self.log.push(RepairAction::ImmoralityPatched { triple, added_edge: (a, b) });
    }

    /// Step (a): reverse a non-fixed edge of each directed cycle.
    fn break_cycles(&mut self) -> Result<bool> {
        let mut changed = false;
        while let Some(cycle) = self.g.find_directed_cycle() {
            let edges: Vec<(usize, usize)> =
                (0..cycle.len()).map(|t| (cycle[t], cycle[(t + 1) % cycle.len()])).collect();
            let eligible: Vec<(usize, usize)> = edges.iter().copied().filter(|e| !self.fixed.contains(e)).collect();
            let Some((a, b)) = pick(&eligible, self.seed) else {
                return Err(Error::Unrecoverable { cycle });
            };
            let before = immoralities(&self.g);
            self.g.set_directed(b, a);
            self.fixed.insert((b, a));
            self.log.push(RepairAction::CycleBroken { edge: (a, b), new_dir: (b, a) });
            changed = true;
            let created: Vec<_> =
                immoralities(&self.g).difference(&before).copied().filter(|t| !self.data_imm.contains(t)).collect();
            for t in created {
                if !self.g.adjacent(t.0, t.2) {
                    self.patch(t);
                }
            }
        }
        Ok(changed)
    }

    /// Step (b): shield immoralities built from two skeleton edges that the
    /// data did not declare.
    fn patch_emergent(&mut self) -> bool {
        let mut changed = false;
        for t @ (x, y, z) in self.new_immoralities() {
            let in_skeleton = |a: usize, b: usize| self.skeleton.contains(&(a.min(b), a.max(b)));
            if in_skeleton(x, y) && in_skeleton(z, y) && !self.g.adjacent(x, z) {
                self.patch(t);
                changed = true;
            }
        }
        changed
    }

    fn run(mut self, max_passes: usize) -> Result<(MixedGraph, RepairLog)> {
        for _ in 0..max_passes {
            loop {
                let mut changed = self.break_cycles()?;
                changed |= self.patch_emergent();
                let oriented = close(&mut self.g, self.data_imm);
                changed |= !oriented.is_empty();
                self.log.extend(oriented);
                if !changed {
                    break;
                }
            }
            if validate_essential(&self.g).is_valid() {
                return Ok((self.g, RepairLog { actions: self.log }));
            }
            // Step (d): triangulate. Fill-ins that land in a forcing
            // structure are oriented by the next closure pass.
            for (a, b) in min_degree_fill_in(&self.g) {
                if !self.g.adjacent(a, b) {
                    self.g.set_undirected(a, b);
                    self.log.push(RepairAction::FillInAdded { edge: (a, b) });
                }
            }
            let forced: Vec<(usize, usize, u8)> = self
                .g
                .undirected_edges()
                .into_iter()
                .flat_map(|(a, b)| [(a, b), (b, a)])
                .filter_map(|(w, y)| forcing_structure(&self.g, w, y).map(|s| (w, y, s)))
                .collect();
            for (w, y, s) in forced {
                if self.g.has_undirected(w, y) {
                    orient(&mut self.g, w, y, s, &mut self.log);
                }
            }
        }
        Err(Error::RepairDiverged(max_passes))
    }
}

/// Turns a closed graph that fails [`validate_essential`] (or carries
/// immoralities the data did not declare) into a valid essential graph.
///
/// `data_imm` are the immoralities found from the data; their edges are never
/// reversed. `skeleton` lists the input adjacencies `(a, b)`, `a < b`.
/// Edges are only ever added or oriented, never removed.
pub fn repair(
    g: &MixedGraph,
    data_imm: &ImmoralitySet,
    skeleton: &[(usize, usize)],
    seed: u64,
) -> Result<(MixedGraph, RepairLog)> {
    let mut fixed = BTreeSet::new();
    for &(i, y, k) in data_imm {
        fixed.insert((i, y));
        fixed.insert((k, y));
    }
    let n = g.n();
    let r = Repairer {
        g: g.clone(),
        data_imm,
        fixed,
        skeleton: skeleton.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect(),
        seed,
        log: Vec::new(),
    };
    if validate_essential(&r.g).is_valid() && r.new_immoralities().is_empty() {
        return Ok((r.g, RepairLog::default()));
    }
    r.run(4 * n * n + 8)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn structure1() {
        // z → w -- y, z and y non-adjacent.
        let mut g = MixedGraph::from_edges(3, &[(0, 1)], &[(1, 2)]).unwrap();
        let log = close_structure1(&mut g);
        assert_eq!(g.directed_edges(), vec![(0, 1), (1, 2)]);
        assert_eq!(log, vec![RepairAction::EdgeOriented { edge: (1, 2), structure: 1 }]);
        assert!(close_structure1(&mut g).is_empty());
    }

    #[test]
    fn structure2() {
        let mut g = MixedGraph::from_edges(3, &[(0, 1), (1, 2)], &[(0, 2)]).unwrap();
        close_structure2(&mut g);
        assert!(g.has_directed(0, 2));
        let mut dag = MixedGraph::from_edges(3, &[(0, 1), (1, 2), (0, 2)], &[]).unwrap();
        assert!(close_structure2(&mut dag).is_empty());
    }

    #[test]
    fn structure3_kite() {
        let (z1, y, z2, w) = (0, 1, 2, 3);
        let mut g = MixedGraph::from_edges(4, &[(z1, y), (z2, y)], &[(w, z1), (w, z2), (w, y)]).unwrap();
        let imm = ImmoralitySet::from([(z1, y, z2)]);
        close_structure3(&mut g, &imm);
        assert!(g.has_directed(w, y));
        let mut h = MixedGraph::from_edges(2, &[], &[(0, 1)]).unwrap();
        assert!(close_structure3(&mut h, &ImmoralitySet::new()).is_empty());
    }

    #[test]
    fn replay_reproduces_close() {
        let start = MixedGraph::from_edges(4, &[(0, 1), (2, 1)], &[(1, 3), (0, 3)]).unwrap();
        let mut g = start.clone();
        let log = RepairLog { actions: close(&mut g, &ImmoralitySet::from([(0, 1, 2)])) };
        assert_eq!(log.replay(&start), g);
    }

    #[test]
    fn valid_graph_is_left_alone() {
        let g = MixedGraph::from_edges(3, &[(0, 1), (2, 1)], &[]).unwrap();
        let (h, log) = repair(&g, &ImmoralitySet::from([(0, 1, 2)]), &g.skeleton_edges(), 0).unwrap();
        assert_eq!(h, g);
        assert!(log.is_empty());
    }

    #[test]
    fn cycle_of_fixed_edges_is_unrecoverable() {
        let g = MixedGraph::from_edges(3, &[(0, 1), (1, 2), (2, 0)], &[]).unwrap();
        let all: Vec<(usize, usize)> = g.directed_edges();
        let mut r = Repairer {
            g: g.clone(),
            data_imm: &ImmoralitySet::new(),
            fixed: all.iter().copied().collect(),
            skeleton: g.skeleton_edges().into_iter().collect(),
            seed: 0,
            log: Vec::new(),
        };
        assert!(matches!(r.break_cycles(), Err(Error::Unrecoverable { .. })));
    }
}
