//! Chordality of the undirected part and minimum-degree triangulation.

use std::collections::BTreeSet;

use super::MixedGraph;

/// Connected components of the undirected part, each sorted, ordered by
/// smallest member. Nodes without undirected edges are omitted.
pub fn undirected_components(g: &MixedGraph) -> Vec<Vec<usize>> {
    let n = g.n();
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for root in 0..n {
        if seen[root] || g.undirected_neighbors(root).is_empty() {
            continue;
        }
        let mut comp = vec![root];
        seen[root] = true;
        let mut k = 0;
        while k < comp.len() {
            for u in g.undirected_neighbors(comp[k]) {
                if !seen[u] {
                    seen[u] = true;
                    comp.push(u);
                }
            }
            k += 1;
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// Maximum-cardinality search order over the undirected part of `nodes`.
/// Ties go to the smallest index.
fn mcs_order(g: &MixedGraph, nodes: &[usize]) -> Vec<usize> {
    let mut weight = vec![0usize; g.n()];
    let mut done = vec![false; g.n()];
    let mut order = Vec::with_capacity(nodes.len());
    for _ in 0..nodes.len() {
        let v =
            *nodes.iter().filter(|&&v| !done[v]).max_by(|&&a, &&b| weight[a].cmp(&weight[b]).then(b.cmp(&a))).unwrap();
        done[v] = true;
        order.push(v);
        for u in g.undirected_neighbors(v) {
            if !done[u] {
                weight[u] += 1;
            }
        }
    }
    order
}

/// True if the undirected graph induced on `nodes` is chordal.
///
/// Uses maximum-cardinality search, then checks that the reverse of the
/// visit order is a perfect elimination ordering.
pub fn is_chordal_on(g: &MixedGraph, nodes: &[usize]) -> bool {
    let order = mcs_order(g, nodes);
    let mut pos = vec![usize::MAX; g.n()];
    for (k, &v) in order.iter().enumerate() {
        pos[v] = k;
    }
    for &v in &order {
        // Neighbours visited before v must form a clique; it suffices that
        // the latest of them is adjacent to all the others.
        let earlier: Vec<usize> = g.undirected_neighbors(v).into_iter().filter(|&u| pos[u] < pos[v]).collect();
        if let Some(&last) = earlier.iter().max_by_key(|&&u| pos[u]) {
            for &u in &earlier {
                if u != last && !g.has_undirected(u, last) {
                    return false;
                }
            }
        }
    }
    true
}

/// True if every connected component of the undirected part is chordal.
pub fn undirected_part_chordal(g: &MixedGraph) -> bool {
    undirected_components(g).iter().all(|c| is_chordal_on(g, c))
}

/// Fill-in edges that make the undirected part chordal, chosen by
/// minimum-degree elimination (ties to the smallest index). Returned pairs
/// are `(a, b)` with `a < b`, in the order they were created.
pub fn min_degree_fill_in(g: &MixedGraph) -> Vec<(usize, usize)> {
    let mut fill = Vec::new();
    for comp in undirected_components(g) {
        let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); g.n()];
        for &v in &comp {
            adj[v] = g.undirected_neighbors(v).into_iter().collect();
        }
        let mut alive: BTreeSet<usize> = comp.iter().copied().collect();
        while let Some(&v) = alive.iter().min_by_key(|&&v| (adj[v].len(), v)) {
            let nb: Vec<usize> = adj[v].iter().copied().collect();
            for (p, &a) in nb.iter().enumerate() {
                for &b in &nb[p + 1..] {
                    if !adj[a].contains(&b) {
                        adj[a].insert(b);
                        adj[b].insert(a);
                        fill.push((a.min(b), a.max(b)));
                    }
                }
            }
            for &u in &nb {
                adj[u].remove(&v);
            }
            alive.remove(&v);
        }
    }
    fill
}

#[cfg(test)]
mod tests {
    use super::*;

    fn undirected(n: usize, edges: &[(usize, usize)]) -> MixedGraph {
        MixedGraph::from_edges(n, &[], edges).unwrap()
    }

    #[test]
    fn square_is_not_chordal() {
        let g = undirected(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]);
        assert!(!undirected_part_chordal(&g));
        let fill = min_degree_fill_in(&g);
        assert_eq!(fill.len(), 1);
        let mut h = g.clone();
        for (a, b) in fill {
            h.add_undirected(a, b).unwrap();
        }
        assert!(undirected_part_chordal(&h));
    }

    #[test]
    fn trees_and_triangles_are_chordal() {
        assert!(undirected_part_chordal(&undirected(4, &[(0, 1), (1, 2), (1, 3)])));
        assert!(undirected_part_chordal(&undirected(3, &[(0, 1), (1, 2), (0, 2)])));
        assert!(min_degree_fill_in(&undirected(4, &[(0, 1), (1, 2), (1, 3)])).is_empty());
    }

    #[test]
    fn directed_edges_do_not_count() {
        let g = MixedGraph::from_edges(4, &[(0, 2)], &[(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        assert!(!undirected_part_chordal(&g));
    }

    #[test]
    fn components_are_separate() {
        let g = undirected(6, &[(0, 1), (3, 4), (4, 5)]);
        assert_eq!(undirected_components(&g), vec![vec![0, 1], vec![3, 4, 5]]);
    }
}
