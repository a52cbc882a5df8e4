//! d-separation in DAGs.

use std::collections::VecDeque;

use super::Dag;
use crate::error::{Error, Result};

fn check(g: &Dag, x: usize, y: usize, cond: &[usize]) -> Result<()> {
    let n = g.n();
    if x >= n || y >= n || cond.iter().any(|&c| c >= n) {
        return Err(Error::Argument("node index out of range".into()));
    }
    if x == y {
        return Err(Error::Argument("d-separation needs two distinct nodes".into()));
    }
    if cond.contains(&x) || cond.contains(&y) {
        return Err(Error::Argument("conditioning set contains a queried node".into()));
    }
    Ok(())
}

/// True if every trail between `x` and `y` is blocked by `cond`.
///
/// Runs a reachability search over (node, direction) states: a trail may pass
/// a non-collider only outside `cond`, and a collider only if it is in `cond`
/// or has a descendant there.
pub fn d_separated(g: &Dag, x: usize, y: usize, cond: &[usize]) -> Result<bool> {
    check(g, x, y, cond)?;
    let n = g.n();
    let mut in_cond = vec![false; n];
    for &c in cond {
        in_cond[c] = true;
    }
    // Nodes in cond or with a descendant in cond.
    let mut opens_collider = in_cond.clone();
    let mut queue: VecDeque<usize> = cond.iter().copied().collect();
    while let Some(v) = queue.pop_front() {
        for p in g.parents(v) {
            if !opens_collider[p] {
                opens_collider[p] = true;
                queue.push_back(p);
            }
        }
    }

    // Direction: 0 = arrived from a child (moving up), 1 = from a parent.
    let mut seen = vec![[false; 2]; n];
    let mut frontier = VecDeque::from([(x, 0usize)]);
    seen[x][0] = true;
    while let Some((v, dir)) = frontier.pop_front() {
        if v == y {
            return Ok(false);
        }
        let mut push = |u: usize, d: usize, frontier: &mut VecDeque<(usize, usize)>| {
            if !seen[u][d] {
                seen[u][d] = true;
                frontier.push_back((u, d));
            }
        };
        if dir == 0 {
            if !in_cond[v] {
                for p in g.parents(v) {
                    push(p, 0, &mut frontier);
                }
                for c in g.children(v) {
                    push(c, 1, &mut frontier);
                }
            }
        } else {
            if !in_cond[v] {
                for c in g.children(v) {
                    push(c, 1, &mut frontier);
                }
            }
            if opens_collider[v] {
                for p in g.parents(v) {
                    push(p, 0, &mut frontier);
                }
            }
        }
    }
    Ok(true)
}

/// Reference implementation by enumerating every simple trail from `x` to
/// `y`. Exponential; meant for checking [`d_separated`] on small graphs.
pub fn d_separated_by_trails(g: &Dag, x: usize, y: usize, cond: &[usize]) -> Result<bool> {
    check(g, x, y, cond)?;
    let n = g.n();
    let gr = g.graph();
    let mut descendants_in_cond = vec![false; n];
    for (v, flag) in descendants_in_cond.iter_mut().enumerate() {
        *flag = cond.iter().any(|&c| gr.has_directed_path(v, c));
    }
    let mut trail = vec![x];
    let mut on_trail = vec![false; n];
    on_trail[x] = true;

    fn blocked(trail: &[usize], g: &Dag, cond: &[usize], desc: &[bool]) -> bool {
        let gr = g.graph();
        for w in 1..trail.len() - 1 {
            let (a, v, b) = (trail[w - 1], trail[w], trail[w + 1]);
            let collider = gr.has_directed(a, v) && gr.has_directed(b, v);
            if collider {
                if !desc[v] {
                    return true;
                }
            } else if cond.contains(&v) {
                return true;
            }
        }
        false
    }

    fn walk(g: &Dag, y: usize, cond: &[usize], desc: &[bool], trail: &mut Vec<usize>, on_trail: &mut [bool]) -> bool {
        let v = *trail.last().unwrap();
        if v == y {
            return !blocked(trail, g, cond, desc);
        }
        for u in g.graph().neighbors(v) {
            if on_trail[u] {
                continue;
            }
            trail.push(u);
            on_trail[u] = true;
            let open = walk(g, y, cond, desc, trail, on_trail);
            trail.pop();
            on_trail[u] = false;
            if open {
                return true;
            }
        }
        false
    }

    Ok(!walk(g, y, cond, &descendants_in_cond, &mut trail, &mut on_trail))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collider() {
        let g = Dag::from_edges(3, &[(0, 1), (2, 1)]).unwrap();
        assert!(d_separated(&g, 0, 2, &[]).unwrap());
        assert!(!d_separated(&g, 0, 2, &[1]).unwrap());
    }

    #[test]
    fn collider_opened_by_descendant() {
        let g = Dag::from_edges(4, &[(0, 1), (2, 1), (1, 3)]).unwrap();
        assert!(!d_separated(&g, 0, 2, &[3]).unwrap());
    }

    #[test]
    fn chain_and_fork() {
        let chain = Dag::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        assert!(d_separated(&chain, 0, 2, &[1]).unwrap());
        assert!(!d_separated(&chain, 0, 2, &[]).unwrap());
        let fork = Dag::from_edges(3, &[(1, 0), (1, 2)]).unwrap();
        assert!(d_separated(&fork, 0, 2, &[1]).unwrap());
    }

    #[test]
    fn two_paths_need_both_blocked() {
        // xj → y → xk, z → y, z → xk: {y, z} separates xj from xk.
        let (xj, y, xk, z) = (0, 1, 2, 3);
        let g = Dag::from_edges(4, &[(xj, y), (y, xk), (z, y), (z, xk)]).unwrap();
        assert!(d_separated(&g, xj, xk, &[y, z]).unwrap());
        assert!(!d_separated(&g, xj, xk, &[y]).unwrap());
    }

    #[test]
    fn rejects_bad_queries() {
        let g = Dag::from_edges(3, &[(0, 1)]).unwrap();
        assert!(d_separated(&g, 0, 0, &[]).is_err());
        assert!(d_separated(&g, 0, 1, &[1]).is_err());
    }
}
