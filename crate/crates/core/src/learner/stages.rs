//! The individual skeleton and immorality stages.
//!
//! Candidate neighbour sets grow in stage 1 by testing each variable against
//! the target given everything accepted so far, are made symmetric in
//! stages 2 and 4, and lose members in stage 3 through a subset search.
//! Immorality candidates are collected while pairs are being separated,
//! which needs no extra tests. Stage 5 settles overlapping contradictory
//! candidates and stage 6 assembles the graph.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::citest::{subsets_of_size, CiSource, Decision};
use crate::error::Result;
use crate::graph::{ImmoralitySet, MixedGraph};

/// Candidate neighbour set per variable.
pub type NeighborSets = Vec<BTreeSet<usize>>;

/// Separating sets, one per separated pair; the first one found is kept.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SepsetStore {
    sets: BTreeMap<(usize, usize), Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SepsetRecord {
    pub a: usize,
    pub b: usize,
    pub set: Vec<usize>,
}

impl SepsetStore {
    /// Stores `S_ij` unless one exists. Returns true if stored.
    pub fn record(&mut self, i: usize, j: usize, set: &[usize]) -> bool {
        let key = (i.min(j), i.max(j));
        if self.sets.contains_key(&key) {
            return false;
        }
        let mut s = set.to_vec();
        s.sort_unstable();
        self.sets.insert(key, s);
        true
    }

    pub fn get(&self, i: usize, j: usize) -> Option<&[usize]> {
        self.sets.get(&(i.min(j), i.max(j))).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn records(&self) -> Vec<SepsetRecord> {
        self.sets.iter().map(|(&(a, b), s)| SepsetRecord { a, b, set: s.clone() }).collect()
    }
}

fn separate<C: CiSource + ?Sized>(ci: &mut C, sepsets: &mut SepsetStore, i: usize, j: usize, set: &[usize]) {
    if sepsets.record(i, j, set) {
        ci.record_sepset(i, j, set);
    }
}

/// Stage 1: for each target `j`, test every other `i` in index order given
/// the current candidate set, and keep `i` if dependent.
pub fn stage1<C: CiSource + ?Sized>(ci: &mut C) -> Result<(NeighborSets, SepsetStore)> {
    let d = ci.n_vars();
    let mut z: NeighborSets = vec![BTreeSet::new(); d];
    let mut sepsets = SepsetStore::default();
    for j in 0..d {
        for i in 0..d {
            if i == j {
                continue;
            }
            let cond: Vec<usize> = z[j].iter().copied().collect();
            match ci.determine(i, j, &cond)? {
                Decision::Dependent => {
                    z[j].insert(i);
                }
                Decision::Independent => separate(ci, &mut sepsets, i, j, &cond),
            }
        }
    }
    Ok((z, sepsets))
}

/// Symmetry prune: `k` leaves `Z_j` when `j ∉ Z_k`. If `imm` is given, each
/// separated pair `j`, `k` contributes `(j, y, k)` for every common candidate
/// `y` outside their separating set.
pub fn symmetric_prune(z: &NeighborSets, sepsets: &SepsetStore, mut imm: Option<&mut ImmoralitySet>) -> NeighborSets {
    let d = z.len();
    let mut out = z.clone();
    for j in 0..d {
        for k in 0..d {
            if k == j || z[k].contains(&j) {
                continue;
            }
            if let Some(imm) = imm.as_deref_mut() {
                if let Some(s) = sepsets.get(j, k) {
                    for &y in z[j].intersection(&z[k]) {
                        if !s.contains(&y) {
                            imm.insert((j, y, k));
                        }
                    }
                }
            }
            out[j].remove(&k);
        }
    }
    out
}

/// Stage 2: symmetry prune with immorality candidates.
pub fn stage2(z: &NeighborSets, sepsets: &SepsetStore, imm: &mut ImmoralitySet) -> NeighborSets {
    symmetric_prune(z, sepsets, Some(imm))
}

/// Stage 3: remove `i` from `Z_j` if some `S ⊆ Z_j ∖ {i}` of size at most
/// `max_cond` separates them. Subsets are tried by size, then
/// lexicographically.
pub fn stage3<C: CiSource + ?Sized>(
    ci: &mut C,
    z: &NeighborSets,
    sepsets: &mut SepsetStore,
    mut imm: Option<&mut ImmoralitySet>,
) -> Result<NeighborSets> {
    let d = z.len();
    let max_cond = ci.max_cond();
    let mut out = z.clone();
    for j in 0..d {
        let mut y: BTreeSet<usize> = z[j].clone();
        for i in z[j].iter().copied() {
            let rest: Vec<usize> = y.iter().copied().filter(|&v| v != i).collect();
            let mut found = None;
            'search: for size in 0..=max_cond.min(rest.len()) {
                for s in subsets_of_size(&rest, size) {
                    if ci.determine(i, j, &s)? == Decision::Independent {
                        found = Some(s);
                        break 'search;
                    }
                }
            }
            let Some(s) = found else { continue };
            y.remove(&i);
            separate(ci, sepsets, i, j, &s);
            if let Some(imm) = imm.as_deref_mut() {
                let sep = sepsets.get(i, j).unwrap_or(&s).to_vec();
                for &p in &y {
                    if !sep.contains(&p) && z[i].contains(&p) {
                        imm.insert((j, p, i));
                    }
                }
            }
        }
        out[j] = y;
    }
    Ok(out)
}

/// Stage 4: final symmetry prune.
pub fn stage4(z: &NeighborSets) -> NeighborSets {
    symmetric_prune(z, &SepsetStore::default(), None)
}

/// Stage 5: keeps only candidates that are vee-structures of the final
/// skeleton, in canonical order, then settles pairs of candidates that
/// orient a shared edge both ways.
///
/// For `(i, j, k)` and `(j, o, p)` with `o ∈ {i, k}`, the statement
/// `A(j, p; S_jp ∪ {o})` decides: independence removes `(j, o, p)`,
/// dependence removes `(i, j, k)`.
pub fn stage5<C: CiSource + ?Sized>(
    ci: &mut C,
    z: &NeighborSets,
    imm: &ImmoralitySet,
    sepsets: &SepsetStore,
) -> Result<ImmoralitySet> {
    let mut live = ImmoralitySet::new();
    for &(a, y, b) in imm {
        if z[a].contains(&y) && z[b].contains(&y) && !z[a].contains(&b) && a != b {
            live.insert((a.min(b), y, a.max(b)));
        }
    }
    let order: Vec<_> = live.iter().copied().collect();
    for t1 @ (i, j, k) in order {
        for o in [k, i] {
            let partners: Vec<(usize, usize, usize)> =
                live.iter().copied().filter(|&(a, c, b)| c == o && (a == j || b == j)).collect();
            for t2 in partners {
                if !live.contains(&t1) {
                    break;
                }
                if !live.contains(&t2) {
                    continue;
                }
                let p = if t2.0 == j { t2.2 } else { t2.0 };
                let mut cond: Vec<usize> = sepsets.get(j, p).map(<[usize]>::to_vec).unwrap_or_default();
                if !cond.contains(&o) {
                    cond.push(o);
                }
                cond.sort_unstable();
                if ci.determine(j, p, &cond)? == Decision::Independent {
                    live.remove(&t2);
                } else {
                    live.remove(&t1);
                }
            }
        }
    }
    Ok(live)
}

/// Stage 6: undirected edges for mutual candidates, then `i → y ← k` for
/// every immorality. An edge already pointing the other way keeps its first
/// orientation.
pub fn stage6(z: &NeighborSets, imm: &ImmoralitySet) -> MixedGraph {
    let d = z.len();
    let mut g = MixedGraph::new(d);
    for a in 0..d {
        for &b in &z[a] {
            if a < b && z[b].contains(&a) {
                g.set_undirected(a, b);
            }
        }
    }
    for &(i, y, k) in imm {
        for x in [i, k] {
            if g.has_undirected(x, y) {
                g.set_directed(x, y);
            }
        }
    }
    g
}

/// Candidate immoralities from a finished skeleton: every vee `i -- y -- k`
/// whose separating set does not contain `y`.
pub fn vees_from_sepsets(z: &NeighborSets, sepsets: &SepsetStore) -> ImmoralitySet {
    let mut out = ImmoralitySet::new();
    let skeleton = stage6(z, &ImmoralitySet::new());
    for (i, y, k) in crate::graph::vee_structures(&skeleton) {
        if let Some(s) = sepsets.get(i, k) {
            if !s.contains(&y) {
                out.insert((i, y, k));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sepsets_keep_first() {
        let mut s = SepsetStore::default();
        assert!(s.record(3, 1, &[2, 0]));
        assert!(!s.record(1, 3, &[4]));
        assert_eq!(s.get(1, 3), Some(&[0, 2][..]));
    }

    #[test]
    fn prune_is_symmetric() {
        let z: NeighborSets = vec![BTreeSet::from([1, 2]), BTreeSet::from([0]), BTreeSet::new()];
        let out = stage4(&z);
        assert_eq!(out, vec![BTreeSet::from([1]), BTreeSet::from([0]), BTreeSet::new()]);
        assert_eq!(stage4(&out), out);
    }

    #[test]
    fn stage6_orients_immoralities() {
        let z: NeighborSets = vec![BTreeSet::from([1]), BTreeSet::from([0, 2]), BTreeSet::from([1])];
        let g = stage6(&z, &ImmoralitySet::from([(0, 1, 2)]));
        assert_eq!(g.directed_edges(), vec![(0, 1), (2, 1)]);
        assert!(stage6(&z, &ImmoralitySet::new()).directed_edges().is_empty());
    }
}
