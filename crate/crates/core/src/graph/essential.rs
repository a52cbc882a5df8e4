//! Essential graphs: construction, validity checks and consistent extensions.

use std::collections::BTreeSet;

use serde::Serialize;

use super::chordal::undirected_part_chordal;
use super::{immoralities, Dag, MixedGraph};
use crate::error::{Error, Result};
use crate::orient;

/// Same skeleton and same immoralities.
pub fn markov_equivalent(g1: &Dag, g2: &Dag) -> bool {
    g1.n() == g2.n()
        && g1.graph().skeleton_edges() == g2.graph().skeleton_edges()
        && immoralities(g1.graph()) == immoralities(g2.graph())
}

/// The essential graph of `dag`: immoralities oriented, then closed under the
/// three strongly-protected structures.
pub fn essential_graph_of(dag: &Dag) -> MixedGraph {
    let imm = immoralities(dag.graph());
    let mut g = dag.graph().skeleton();
    for &(i, y, k) in &imm {
        g.set_directed(i, y);
        g.set_directed(k, y);
    }
    orient::close(&mut g, &imm);
    g
}

/// The essential graph by brute force: every acyclic orientation of the
/// skeleton that is Markov equivalent to `dag`, intersected. Limited to
/// skeletons with at most 20 edges.
pub fn essential_graph_by_enumeration(dag: &Dag) -> Result<MixedGraph> {
    let edges = dag.graph().skeleton_edges();
    if edges.len() > 20 {
        return Err(Error::Argument(format!("{} edges is too many to enumerate", edges.len())));
    }
    let target = immoralities(dag.graph());
    // For each edge: seen forward (a→b), seen backward.
    let mut forward = vec![false; edges.len()];
    let mut backward = vec![false; edges.len()];
    for mask in 0u32..(1u32 << edges.len()) {
        let mut g = MixedGraph::new(dag.n());
        for (e, &(a, b)) in edges.iter().enumerate() {
            if mask >> e & 1 == 0 {
                g.set_directed(a, b);
            } else {
                g.set_directed(b, a);
            }
        }
        if g.find_directed_cycle().is_some() || immoralities(&g) != target {
            continue;
        }
        for e in 0..edges.len() {
            if mask >> e & 1 == 0 {
                forward[e] = true;
            } else {
                backward[e] = true;
            }
        }
    }
    let mut out = MixedGraph::new(dag.n());
    for (e, &(a, b)) in edges.iter().enumerate() {
        match (forward[e], backward[e]) {
            (true, false) => out.set_directed(a, b),
            (false, true) => out.set_directed(b, a),
            _ => out.set_undirected(a, b),
        }
    }
    Ok(out)
}

/// The three conditions a mixed graph must meet to be an essential graph
/// obtainable from the learner's output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ValidityReport {
    pub acyclic_directed_part: bool,
    pub closure_complete: bool,
    pub components_triangulated: bool,
}

impl ValidityReport {
    pub fn is_valid(&self) -> bool {
        self.acyclic_directed_part && self.closure_complete && self.components_triangulated
    }

    /// Name of the first failed condition.
    pub fn first_failure(&self) -> Option<&'static str> {
        if !self.acyclic_directed_part {
            Some("directed part has a cycle")
        } else if !self.closure_complete {
            Some("an undirected edge is forced by a strongly protected structure")
        } else if !self.components_triangulated {
            Some("an undirected component is not triangulated")
        } else {
            None
        }
    }
}

/// Returns the structure (1, 2 or 3) that would force `w → y`, if any.
pub fn forcing_structure(g: &MixedGraph, w: usize, y: usize) -> Option<u8> {
    if !g.has_undirected(w, y) {
        return None;
    }
    let n = g.n();
    // 1: z → w -- y with z, y non-adjacent.
    if g.parents(w).into_iter().any(|z| z != y && !g.adjacent(z, y)) {
        return Some(1);
    }
    // 2: w → z → y.
    if (0..n).any(|z| g.has_directed(w, z) && g.has_directed(z, y)) {
        return Some(2);
    }
    // 3: z1 → y ← z2, z1 and z2 non-adjacent, w -- z1 and w -- z2.
    let cands: Vec<usize> = g.parents(y).into_iter().filter(|&z| g.has_undirected(w, z)).collect();
    for (p, &z1) in cands.iter().enumerate() {
        for &z2 in &cands[p + 1..] {
            if !g.adjacent(z1, z2) {
                return Some(3);
            }
        }
    }
    None
}

pub fn validate_essential(g: &MixedGraph) -> ValidityReport {
    let acyclic_directed_part = g.find_directed_cycle().is_none();
    let closure_complete = g
        .undirected_edges()
        .into_iter()
        .all(|(a, b)| forcing_structure(g, a, b).is_none() && forcing_structure(g, b, a).is_none());
    ValidityReport { acyclic_directed_part, closure_complete, components_triangulated: undirected_part_chordal(g) }
}

/// Orients every undirected edge of a valid essential graph so that the
/// result is acyclic and has exactly the immoralities already in `g`.
///
/// Repeatedly takes the highest-index node that has no outgoing directed
/// edge and whose undirected neighbours are adjacent to all its other
/// neighbours, points its undirected edges into it and removes it.
pub fn consistent_extension(g: &MixedGraph) -> Result<Dag> {
    let report = validate_essential(g);
    if let Some(msg) = report.first_failure() {
        return Err(Error::Precondition(msg.to_owned()));
    }
    let n = g.n();
    let mut work = g.clone();
    let mut out = MixedGraph::new(n);
    for (a, b) in g.directed_edges() {
        out.set_directed(a, b);
    }
    let mut alive: BTreeSet<usize> = (0..n).collect();
    while !alive.is_empty() {
        let sink = alive.iter().rev().copied().find(|&x| {
            if !work.children(x).is_empty() {
                return false;
            }
            let nb = work.neighbors(x);
            work.undirected_neighbors(x).into_iter().all(|y| nb.iter().all(|&z| z == y || work.adjacent(y, z)))
        });
        let Some(x) = sink else {
            return Err(Error::Precondition("no consistent extension exists".into()));
        };
        for y in work.undirected_neighbors(x) {
            out.set_directed(y, x);
        }
        for y in work.neighbors(x) {
            work.remove_edge(x, y);
        }
        alive.remove(&x);
    }
    let dag = Dag::from_graph(out)?;
    if immoralities(dag.graph()) != immoralities(g) {
        return Err(Error::Precondition("extension would add immoralities".into()));
    }
    Ok(dag)
}

/// Parents, children and the children's other parents of `x`.
pub fn markov_blanket(dag: &Dag, x: usize) -> BTreeSet<usize> {
    let mut out: BTreeSet<usize> = dag.parents(x).into_iter().collect();
    for c in dag.children(x) {
        out.insert(c);
        out.extend(dag.parents(c));
    }
    out.remove(&x);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_and_fork_are_equivalent() {
        let chain = Dag::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let fork = Dag::from_edges(3, &[(1, 0), (1, 2)]).unwrap();
        let collider = Dag::from_edges(3, &[(0, 1), (2, 1)]).unwrap();
        assert!(markov_equivalent(&chain, &fork));
        assert!(!markov_equivalent(&chain, &collider));
    }

    #[test]
    fn single_edge_and_collider() {
        let e = essential_graph_of(&Dag::from_edges(2, &[(1, 0)]).unwrap());
        assert_eq!(e.undirected_edges(), vec![(0, 1)]);
        let c = essential_graph_of(&Dag::from_edges(3, &[(0, 1), (2, 1)]).unwrap());
        assert_eq!(c.directed_edges(), vec![(0, 1), (2, 1)]);
    }

    #[test]
    fn square_fails_triangulation() {
        let g = MixedGraph::from_edges(4, &[], &[(0, 1), (1, 2), (2, 3), (0, 3)]).unwrap();
        let r = validate_essential(&g);
        assert!(r.acyclic_directed_part && r.closure_complete && !r.components_triangulated);
        assert!(consistent_extension(&g).is_err());
    }

    #[test]
    fn directed_cycle_fails() {
        let g = MixedGraph::from_edges(3, &[(0, 1), (1, 2), (2, 0)], &[]).unwrap();
        assert!(!validate_essential(&g).acyclic_directed_part);
        let err = consistent_extension(&g).unwrap_err();
        assert!(err.to_string().contains("cycle"));
    }

    #[test]
    fn extension_of_single_edge_follows_node_order() {
        let g = MixedGraph::from_edges(2, &[], &[(0, 1)]).unwrap();
        assert_eq!(consistent_extension(&g).unwrap().edges(), vec![(0, 1)]);
    }

    #[test]
    fn blanket() {
        let collider = Dag::from_edges(3, &[(0, 1), (2, 1)]).unwrap();
        assert_eq!(markov_blanket(&collider, 0), BTreeSet::from([1, 2]));
        assert!(markov_blanket(&Dag::empty(2), 0).is_empty());
    }
}
