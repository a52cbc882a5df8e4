//! Mixed graphs (directed plus undirected edges), DAGs and the operations on
//! them the learner needs: d-separation, vee-structures and immoralities,
//! Markov equivalence, essential graphs and consistent extensions.

pub mod chordal;
pub mod dsep;
pub mod essential;
pub mod serialize;

use std::collections::{BTreeSet, VecDeque};

use crate::error::{Error, Result};

pub use dsep::{d_separated, d_separated_by_trails};
pub use essential::{
    consistent_extension, essential_graph_by_enumeration, essential_graph_of, markov_blanket, markov_equivalent,
    validate_essential, ValidityReport,
};

/// Triples `(i, y, k)` with `i < k`, read as `i → y ← k`.
pub type ImmoralitySet = BTreeSet<(usize, usize, usize)>;

const NONE: u8 = 0;
const OUT: u8 = 1;
const IN: u8 = 2;
const UND: u8 = 3;

/// A graph with at most one edge per node pair, each either directed or
/// undirected. Stored as a dense mark matrix.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct MixedGraph {
    n: usize,
    marks: Vec<u8>,
}

impl std::fmt::Debug for MixedGraph {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MixedGraph")
            .field("n", &self.n)
            .field("directed", &self.directed_edges())
            .field("undirected", &self.undirected_edges())
            .finish()
    }
}

impl MixedGraph {
    pub fn new(n: usize) -> Self {
        MixedGraph { n, marks: vec![NONE; n * n] }
    }

    /// Builds a graph from edge lists, rejecting duplicates and self-loops.
    pub fn from_edges(n: usize, directed: &[(usize, usize)], undirected: &[(usize, usize)]) -> Result<Self> {
        let mut g = MixedGraph::new(n);
        for &(a, b) in directed {
            g.add_directed(a, b)?;
        }
        for &(a, b) in undirected {
            g.add_undirected(a, b)?;
        }
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn mark(&self, a: usize, b: usize) -> u8 {
        self.marks[a * self.n + b]
    }

    fn set(&mut self, a: usize, b: usize, m: u8) {
        let back = match m {
            OUT => IN,
            IN => OUT,
            other => other,
        };
        self.marks[a * self.n + b] = m;
        self.marks[b * self.n + a] = back;
    }

    fn check_pair(&self, a: usize, b: usize) -> Result<()> {
        if a >= self.n || b >= self.n {
            return Err(Error::Argument(format!("edge ({a},{b}) out of range for {} nodes", self.n)));
        }
        if a == b {
            return Err(Error::Argument(format!("self-loop at {a}")));
        }
        Ok(())
    }

    pub fn add_directed(&mut self, a: usize, b: usize) -> Result<()> {
        self.check_pair(a, b)?;
        if self.adjacent(a, b) {
            return Err(Error::Argument(format!("nodes {a} and {b} are already adjacent")));
        }
        self.set(a, b, OUT);
        Ok(())
    }

    pub fn add_undirected(&mut self, a: usize, b: usize) -> Result<()> {
        self.check_pair(a, b)?;
        if self.adjacent(a, b) {
            return Err(Error::Argument(format!("nodes {a} and {b} are already adjacent")));
        }
        self.set(a, b, UND);
        Ok(())
    }

    /// Makes the edge between `a` and `b` read `a → b`, replacing whatever
    /// edge was there (or adding one).
    pub fn set_directed(&mut self, a: usize, b: usize) {
        assert!(a != b && a < self.n && b < self.n);
        self.set(a, b, OUT);
    }

    pub fn set_undirected(&mut self, a: usize, b: usize) {
        assert!(a != b && a < self.n && b < self.n);
        self.set(a, b, UND);
    }

    pub fn remove_edge(&mut self, a: usize, b: usize) {
        self.set(a, b, NONE);
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        a != b && self.mark(a, b) != NONE
    }

    /// True if `a → b`.
    pub fn has_directed(&self, a: usize, b: usize) -> bool {
        a != b && self.mark(a, b) == OUT
    }

    pub fn has_undirected(&self, a: usize, b: usize) -> bool {
        a != b && self.mark(a, b) == UND
    }

    fn with_mark(&self, v: usize, m: u8) -> Vec<usize> {
        (0..self.n).filter(|&u| u != v && self.mark(v, u) == m).collect()
    }

    pub fn parents(&self, v: usize) -> Vec<usize> {
        self.with_mark(v, IN)
    }

    pub fn children(&self, v: usize) -> Vec<usize> {
        self.with_mark(v, OUT)
    }

    pub fn undirected_neighbors(&self, v: usize) -> Vec<usize> {
        self.with_mark(v, UND)
    }

    pub fn neighbors(&self, v: usize) -> Vec<usize> {
        (0..self.n).filter(|&u| self.adjacent(v, u)).collect()
    }

    /// Directed edges `(a, b)` meaning `a → b`, sorted.
    pub fn directed_edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for a in 0..self.n {
            for b in 0..self.n {
                if self.has_directed(a, b) {
                    out.push((a, b));
                }
            }
        }
        out
    }

    /// Undirected edges `(a, b)` with `a < b`, sorted.
    pub fn undirected_edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for a in 0..self.n {
            for b in a + 1..self.n {
                if self.has_undirected(a, b) {
                    out.push((a, b));
                }
            }
        }
        out
    }

    /// Every adjacent pair `(a, b)` with `a < b`, sorted.
    pub fn skeleton_edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for a in 0..self.n {
            for b in a + 1..self.n {
                if self.adjacent(a, b) {
                    out.push((a, b));
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.skeleton_edges().len()
    }

    /// The same adjacencies with every edge undirected.
    pub fn skeleton(&self) -> MixedGraph {
        let mut g = MixedGraph::new(self.n);
        for (a, b) in self.skeleton_edges() {
            g.set(a, b, UND);
        }
        g
    }

    /// A directed cycle of the directed part as a node sequence
    /// `v0 → v1 → … → v0` (first node not repeated), if one exists.
    pub fn find_directed_cycle(&self) -> Option<Vec<usize>> {
        // Colour-marking depth-first search from each node in index order.
        let mut colour = vec![0u8; self.n];
        let mut parent = vec![usize::MAX; self.n];
        for root in 0..self.n {
            if colour[root] != 0 {
                continue;
            }
            let mut stack = vec![(root, 0usize)];
            colour[root] = 1;
            while let Some(&mut (v, ref mut next)) = stack.last_mut() {
                let children = self.children(v);
                if *next < children.len() {
                    let c = children[*next];
                    *next += 1;
                    match colour[c] {
                        0 => {
                            colour[c] = 1;
                            parent[c] = v;
                            stack.push((c, 0));
                        }
                        1 => {
                            let mut cycle = vec![v];
                            let mut u = v;
                            while u != c {
                                u = parent[u];
                                cycle.push(u);
                            }
                            cycle.reverse();
                            return Some(cycle);
                        }
                        _ => {}
                    }
                } else {
                    colour[v] = 2;
                    stack.pop();
                }
            }
        }
        None
    }

    /// True if a directed path `from ⇝ to` exists (length ≥ 0).
    pub fn has_directed_path(&self, from: usize, to: usize) -> bool {
        if from == to {
            return true;
        }
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([from]);
        seen[from] = true;
        while let Some(v) = queue.pop_front() {
            for c in self.children(v) {
                if c == to {
                    return true;
                }
                if !seen[c] {
                    seen[c] = true;
                    queue.push_back(c);
                }
            }
        }
        false
    }
}

/// A directed acyclic graph.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Dag {
    g: MixedGraph,
}

impl std::fmt::Debug for Dag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_tuple("Dag").field(&self.g.directed_edges()).finish()
    }
}

impl Dag {
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        Dag::from_graph(MixedGraph::from_edges(n, edges, &[])?)
    }

    /// Checks that `g` has no undirected edges and no directed cycle.
    pub fn from_graph(g: MixedGraph) -> Result<Self> {
        if let Some(&(a, b)) = g.undirected_edges().first() {
            return Err(Error::Argument(format!("a DAG cannot contain the undirected edge {a} -- {b}")));
        }
        if let Some(cycle) = g.find_directed_cycle() {
            return Err(Error::Cyclic(cycle));
        }
        Ok(Dag { g })
    }

    pub fn empty(n: usize) -> Self {
        Dag { g: MixedGraph::new(n) }
    }

    pub fn n(&self) -> usize {
        self.g.n
    }

    pub fn graph(&self) -> &MixedGraph {
        &self.g
    }

    pub fn into_graph(self) -> MixedGraph {
        self.g
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.g.directed_edges()
    }

    pub fn parents(&self, v: usize) -> Vec<usize> {
        self.g.parents(v)
    }

    pub fn children(&self, v: usize) -> Vec<usize> {
        self.g.children(v)
    }

    /// A topological order, smallest available index first.
    pub fn topological_order(&self) -> Vec<usize> {
        let n = self.g.n;
        let mut indeg: Vec<usize> = (0..n).map(|v| self.parents(v).len()).collect();
        let mut ready: BTreeSet<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(v) = ready.pop_first() {
            order.push(v);
            for c in self.children(v) {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    ready.insert(c);
                }
            }
        }
        order
    }
}

/// All vee-structures `i -- y -- k` (ignoring orientation) with `i`, `k`
/// non-adjacent, as `(i, y, k)` with `i < k`, sorted.
pub fn vee_structures(g: &MixedGraph) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    for y in 0..g.n() {
        let nb = g.neighbors(y);
        for (p, &i) in nb.iter().enumerate() {
            for &k in &nb[p + 1..] {
                if !g.adjacent(i, k) {
                    out.push((i, y, k));
                }
            }
        }
    }
    out.sort_unstable();
    out
}

/// All `i → y ← k` with `i`, `k` non-adjacent.
pub fn immoralities(g: &MixedGraph) -> ImmoralitySet {
    let mut out = ImmoralitySet::new();
    for y in 0..g.n() {
        let pa = g.parents(y);
        for (p, &i) in pa.iter().enumerate() {
            for &k in &pa[p + 1..] {
                if !g.adjacent(i, k) {
                    out.insert((i, y, k));
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_edge_per_pair() {
        let mut g = MixedGraph::new(3);
        g.add_directed(0, 1).unwrap();
        assert!(g.add_undirected(1, 0).is_err());
        assert!(g.add_directed(1, 0).is_err());
        assert!(g.add_directed(2, 2).is_err());
        g.set_directed(1, 0);
        assert_eq!(g.directed_edges(), vec![(1, 0)]);
        g.set_undirected(0, 1);
        assert_eq!(g.undirected_edges(), vec![(0, 1)]);
        assert!(g.directed_edges().is_empty());
    }

    #[test]
    fn cycle_detection() {
        let g = MixedGraph::from_edges(4, &[(0, 1), (1, 2), (2, 0), (2, 3)], &[]).unwrap();
        let c = g.find_directed_cycle().unwrap();
        assert_eq!(c.len(), 3);
        for w in 0..c.len() {
            assert!(g.has_directed(c[w], c[(w + 1) % c.len()]));
        }
        assert!(matches!(Dag::from_graph(g), Err(Error::Cyclic(_))));
    }

    #[test]
    fn vees_on_path_and_complete_graph() {
        let path = MixedGraph::from_edges(3, &[], &[(0, 1), (1, 2)]).unwrap();
        assert_eq!(vee_structures(&path), vec![(0, 1, 2)]);
        let complete = MixedGraph::from_edges(3, &[], &[(0, 1), (1, 2), (0, 2)]).unwrap();
        assert!(vee_structures(&complete).is_empty());
    }

    #[test]
    fn immoralities_need_nonadjacent_parents() {
        let v = MixedGraph::from_edges(3, &[(0, 1), (2, 1)], &[]).unwrap();
        assert_eq!(immoralities(&v), ImmoralitySet::from([(0, 1, 2)]));
        let shielded = MixedGraph::from_edges(3, &[(0, 1), (2, 1), (0, 2)], &[]).unwrap();
        assert!(immoralities(&shielded).is_empty());
    }

    #[test]
    fn topological_order_respects_edges() {
        let d = Dag::from_edges(4, &[(3, 1), (1, 0), (2, 0)]).unwrap();
        let order = d.topological_order();
        let pos = |v| order.iter().position(|&x| x == v).unwrap();
        for (a, b) in d.edges() {
            assert!(pos(a) < pos(b));
        }
    }
}
