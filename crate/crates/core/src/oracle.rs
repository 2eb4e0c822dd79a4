//! Exhaustive reference solvers for small instances, used by tests and the
//! acceptance suite.

use std::collections::BTreeSet;

use crate::channel::RadioMap;
use crate::error::{Error, Result};
use crate::graphs::{ConflictGraph, LinkGraph};
use crate::model::{LinkId, NodeId};
use crate::plan::evaluate_groups;
use crate::scheduling::SdmaGroups;

/// Size limits checked before any exhaustive search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleBudget {
    pub max_links: usize,
    pub max_slots: u32,
    pub max_graph_nodes: usize,
}

impl Default for OracleBudget {
    fn default() -> Self {
        Self {
            max_links: 8,
            max_slots: 8,
            max_graph_nodes: 12,
        }
    }
}

/// Size of a maximum independent set, by subset enumeration.
pub fn exhaustive_mis(cg: &ConflictGraph, budget: &OracleBudget) -> Result<usize> {
    let n = cg.len();
    if n > budget.max_graph_nodes {
        return Err(Error::Budget(format!(
            "{n} vertices exceed {}",
            budget.max_graph_nodes
        )));
    }
    let masks: Vec<u32> = (0..n)
        .map(|i| cg.adjacent(i).iter().fold(0u32, |m, &j| m | (1 << j)))
        .collect();
    let mut best = 0;
    for subset in 0u32..(1u32 << n) {
        let independent = (0..n).all(|i| subset & (1 << i) == 0 || subset & masks[i] == 0);
        if independent {
            best = best.max(subset.count_ones() as usize);
        }
    }
    Ok(best)
}

/// All partitions of `items` into independent sets of `cg`.
fn independent_partitions(items: &[LinkId], cg: &ConflictGraph) -> Vec<Vec<Vec<LinkId>>> {
    fn extend(
        i: usize,
        items: &[LinkId],
        cg: &ConflictGraph,
        current: &mut Vec<Vec<LinkId>>,
        out: &mut Vec<Vec<Vec<LinkId>>>,
    ) {
        if i == items.len() {
            out.push(current.clone());
            return;
        }
        let v = items[i];
        for k in 0..current.len() {
            if current[k].iter().all(|&u| !cg.has_edge(u, v)) {
                current[k].push(v);
                extend(i + 1, items, cg, current, out);
                current[k].pop();
            }
        }
        current.push(vec![v]);
        extend(i + 1, items, cg, current, out);
        current.pop();
    }
    let mut out = Vec::new();
    extend(0, items, cg, &mut Vec::new(), &mut out);
    out
}

/// Best objective (sum of rate times slots) over every independent grouping,
/// every slot vector with total at most `n_slots`, and water-filled powers.
pub fn brute_force_jsra(
    radio: &RadioMap,
    links: &[LinkId],
    cg: &ConflictGraph,
    n_slots: u32,
    budget: &OracleBudget,
) -> Result<f64> {
    if links.len() > budget.max_links {
        return Err(Error::Budget(format!(
            "{} links exceed {}",
            links.len(),
            budget.max_links
        )));
    }
    if n_slots > budget.max_slots {
        return Err(Error::Budget(format!(
            "{n_slots} slots exceed {}",
            budget.max_slots
        )));
    }
    let mut best = 0.0f64;
    for partition in independent_partitions(links, cg) {
        let groups = SdmaGroups { groups: partition };
        let (_, capacity, _) = evaluate_groups(radio, &groups)?;
        let group_rates: Vec<f64> = groups
            .groups
            .iter()
            .map(|g| g.iter().map(|l| capacity[l]).sum())
            .collect();
        let mut slots = vec![0u32; group_rates.len()];
        enumerate_slots(&mut slots, 0, n_slots, &mut |n| {
            let value: f64 = group_rates
                .iter()
                .zip(n)
                .map(|(r, &k)| r * f64::from(k))
                .sum();
            best = best.max(value);
        });
    }
    Ok(best)
}

fn enumerate_slots(slots: &mut Vec<u32>, i: usize, left: u32, visit: &mut impl FnMut(&[u32])) {
    if i == slots.len() {
        visit(slots);
        return;
    }
    for k in 0..=left {
        slots[i] = k;
        enumerate_slots(slots, i + 1, left - k, visit);
    }
    slots[i] = 0;
}

/// Water-filling by bisection on the water level.
pub fn waterfill_bisection(gammas: &[f64], p_max: f64) -> Result<Vec<f64>> {
    if gammas.is_empty() {
        return Err(Error::Empty("channel quality list"));
    }
    if gammas.iter().any(|g| !(*g > 0.0)) || !(p_max > 0.0) {
        return Err(Error::Domain(
            "channel qualities and power budget must be positive".into(),
        ));
    }
    let inv: Vec<f64> = gammas.iter().map(|g| 1.0 / g).collect();
    let used = |level: f64| inv.iter().map(|x| (level - x).max(0.0)).sum::<f64>();
    let floor = inv.iter().cloned().fold(f64::INFINITY, f64::min);
    let (mut lo, mut hi) = (floor, floor + p_max);
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if used(mid) > p_max {
            hi = mid;
        } else {
            lo = mid;
        }
        if (used(lo) - p_max).abs() <= 1e-12 {
            break;
        }
    }
    let level = if (used(lo) - p_max).abs() <= (used(hi) - p_max).abs() {
        lo
    } else {
        hi
    };
    Ok(inv.iter().map(|x| (level - x).max(0.0)).collect())
}

/// Best bottleneck weight from `s` to `d` over all simple paths.
pub fn widest_path_oracle(
    lg: &LinkGraph,
    s: NodeId,
    d: NodeId,
    budget: &OracleBudget,
) -> Result<Option<f64>> {
    if lg.node_count() > budget.max_graph_nodes {
        return Err(Error::Budget(format!(
            "{} nodes exceed {}",
            lg.node_count(),
            budget.max_graph_nodes
        )));
    }
    fn walk(
        lg: &LinkGraph,
        v: NodeId,
        d: NodeId,
        width: f64,
        seen: &mut BTreeSet<NodeId>,
        best: &mut Option<f64>,
    ) {
        if v == d {
            *best = Some(best.map_or(width, |b: f64| b.max(width)));
            return;
        }
        for e in lg.out_edges(v) {
            if seen.insert(e.rx) {
                walk(lg, e.rx, d, width.min(e.weight), seen, best);
                seen.remove(&e.rx);
            }
        }
    }
    if s == d {
        return Ok(None);
    }
    let mut best = None;
    let mut seen = BTreeSet::from([s]);
    walk(lg, s, d, f64::INFINITY, &mut seen, &mut best);
    Ok(best)
}

/// Bottleneck between `s` and `d` on the maximum spanning tree of an
/// undirected weighted graph given as `(a, b, w)` edges.
pub fn spanning_tree_bottleneck(
    n: usize,
    edges: &[(usize, usize, f64)],
    s: usize,
    d: usize,
) -> Option<f64> {
    let mut order: Vec<&(usize, usize, f64)> = edges.iter().collect();
    order.sort_by(|a, b| b.2.total_cmp(&a.2));
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        let mut x = x;
        while p[x] != r {
            let next = p[x];
            p[x] = r;
            x = next;
        }
        r
    }
    // Adding edges heaviest first, s and d join at the bottleneck weight.
    for &&(a, b, w) in &order {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra] = rb;
            if find(&mut parent, s) == find(&mut parent, d) {
                return Some(w);
            }
        }
    }
    None
}
