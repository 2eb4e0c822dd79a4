//! Bottleneck path selection and the dynamic routing loop.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::channel::RadioMap;
use crate::error::Result;
use crate::graphs::LinkGraph;
use crate::model::{Demand, Direction, LinkId, NetworkScenario, NodeId, Role, Route};
use crate::plan::{group_links, SwitchMode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutePath {
    pub nodes: Vec<NodeId>,
    /// Smallest edge weight along the path, bits/s.
    pub weight: f64,
}

impl RoutePath {
    pub fn hops(&self) -> usize {
        self.nodes.len().saturating_sub(1)
    }

    /// Link ids of the path in `lg`, or `None` if a hop has no edge.
    pub fn links(&self, lg: &LinkGraph) -> Option<Vec<LinkId>> {
        self.nodes
            .windows(2)
            .map(|w| lg.edge_between(w[0], w[1]).map(|e| e.link))
            .collect()
    }
}

/// Layered frontier search for the path from `s` to `d` with the widest bottleneck.
///
/// Returns `None` when `d` cannot be reached.
pub fn select_path(lg: &LinkGraph, s: NodeId, d: NodeId) -> Option<RoutePath> {
    if s == d || !lg.contains(s) || !lg.contains(d) {
        return None;
    }
    let mut width: BTreeMap<NodeId, f64> = BTreeMap::new();
    let mut parents: BTreeMap<NodeId, BTreeSet<NodeId>> = BTreeMap::new();
    let mut traversed: BTreeSet<NodeId> = BTreeSet::new();
    let mut current: BTreeSet<NodeId> = BTreeSet::from([s]);
    width.insert(s, f64::INFINITY);

    while !current.is_empty() && traversed.len() < lg.node_count() {
        let mut next = BTreeSet::new();
        for &v in &current {
            let wv = width[&v];
            for e in lg.out_edges(v) {
                let u = e.rx;
                if u == s || traversed.contains(&u) {
                    continue;
                }
                let candidate = e.weight.min(wv);
                match width.get(&u).copied() {
                    None => {
                        width.insert(u, candidate);
                        parents.entry(u).or_default().insert(v);
                        next.insert(u);
                    }
                    Some(wu) if wu == candidate => {
                        parents.entry(u).or_default().insert(v);
                        next.insert(u);
                    }
                    Some(wu) if wu < candidate => {
                        width.insert(u, candidate);
                        parents.insert(u, BTreeSet::from([v]));
                        next.insert(u);
                    }
                    Some(_) => {}
                }
            }
            traversed.insert(v);
        }
        current = next;
    }

    if !parents.contains_key(&d) {
        return None;
    }
    let nodes = reconstruct(&parents, s, d)?;
    let weight = nodes
        .windows(2)
        .map(|w| lg.edge_between(w[0], w[1]).map_or(0.0, |e| e.weight))
        .fold(f64::INFINITY, f64::min);
    Some(RoutePath { nodes, weight })
}

/// Walks parents back from `d`, preferring the parent with the fewest hops to
/// `s`, then the lowest id.
fn reconstruct(
    parents: &BTreeMap<NodeId, BTreeSet<NodeId>>,
    s: NodeId,
    d: NodeId,
) -> Option<Vec<NodeId>> {
    fn hops(
        v: NodeId,
        s: NodeId,
        parents: &BTreeMap<NodeId, BTreeSet<NodeId>>,
        memo: &mut BTreeMap<NodeId, Option<usize>>,
        depth: usize,
    ) -> Option<usize> {
        if v == s {
            return Some(0);
        }
        if let Some(h) = memo.get(&v) {
            return *h;
        }
        if depth > parents.len() + 1 {
            return None;
        }
        let best = parents
            .get(&v)?
            .iter()
            .filter_map(|&p| hops(p, s, parents, memo, depth + 1))
            .min()
            .map(|h| h + 1);
        memo.insert(v, best);
        best
    }

    let mut memo = BTreeMap::new();
    let mut path = vec![d];
    let mut v = d;
    while v != s {
        let p = parents
            .get(&v)?
            .iter()
            .filter_map(|&p| hops(p, s, parents, &mut memo, 0).map(|h| (h, p)))
            .min()?
            .1;
        path.push(p);
        v = p;
        if path.len() > parents.len() + 2 {
            return None;
        }
    }
    path.reverse();
    Some(path)
}

/// Recomputes edge weights given the link sets of committed routes.
///
/// Committed links get the share of their planned rate a further flow would
/// receive; other links get their single-link rate scaled by the slots a new
/// group would obtain.
pub fn update_network(
    radio: &RadioMap,
    base: &LinkGraph,
    committed: &[Vec<LinkId>],
) -> Result<LinkGraph> {
    let mut flows: BTreeMap<LinkId, usize> = BTreeMap::new();
    for route in committed {
        for &l in route {
            *flows.entry(l).or_default() += 1;
        }
    }
    let mut lg = base.clone();
    if flows.is_empty() {
        lg.set_weights(|e| radio.single_link_capacity(radio.link(e.link)));
        return Ok(lg);
    }
    let links: Vec<LinkId> = flows.keys().copied().collect();
    let grouped = group_links(radio, &links)?;
    let required: BTreeMap<LinkId, u32> = links.iter().map(|&l| (l, 1)).collect();
    let plan = grouped.plan(radio, &required, SwitchMode::Flexible)?;
    let n = radio.params().slots_per_frame;
    let k = grouped.groups.len() as u32;
    let fresh_share = f64::from(n / (k + 1)) / f64::from(n);
    lg.set_weights(|e| match flows.get(&e.link) {
        Some(&f) => plan.link_rate(e.link) / (f as f64 + 1.0),
        None => radio.single_link_capacity(radio.link(e.link)) * fresh_share,
    });
    Ok(lg)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RoutingOutcome {
    pub paths: BTreeMap<(NodeId, Direction), RoutePath>,
    pub unrouted: Vec<(NodeId, Direction)>,
}

impl RoutingOutcome {
    /// Routes in scenario form, carrying the given per-flow demand.
    pub fn routes(&self, demand: impl Fn(NodeId, Direction) -> Demand) -> Vec<Route> {
        self.paths
            .iter()
            .map(|(&(ue, direction), p)| Route {
                ue,
                direction,
                nodes: p.nodes.clone(),
                demand: demand(ue, direction),
            })
            .collect()
    }
}

/// The part of `lg` a flow of `ue` may use in `direction`: infrastructure
/// nodes plus the UE itself, links of the matching direction only.
pub fn flow_view(
    s: &NetworkScenario,
    lg: &LinkGraph,
    ue: NodeId,
    direction: Direction,
) -> LinkGraph {
    let nodes: BTreeSet<NodeId> = s
        .nodes
        .iter()
        .filter(|n| n.id == ue || n.role.is_infrastructure())
        .map(|n| n.id)
        .collect();
    lg.restrict(&nodes, |e| s.link(e.link).direction == direction)
}

/// Routes each UE in turn on the current weights, committing downlink and
/// uplink paths and refreshing the weights after every UE.
pub fn dynamic_routing(
    s: &NetworkScenario,
    radio: &RadioMap,
    base: &LinkGraph,
    ues: &[NodeId],
) -> Result<RoutingOutcome> {
    let Some(bs) = s.bs().map(|n| n.id) else {
        return Ok(RoutingOutcome::default());
    };
    let mut ues = ues.to_vec();
    ues.sort();
    let mut outcome = RoutingOutcome::default();
    let mut committed: Vec<Vec<LinkId>> = Vec::new();
    let mut lg = update_network(radio, base, &committed)?;
    for ue in ues {
        for direction in [Direction::Downlink, Direction::Uplink] {
            let view = flow_view(s, &lg, ue, direction);
            let (from, to) = match direction {
                Direction::Downlink => (bs, ue),
                Direction::Uplink => (ue, bs),
            };
            match select_path(&view, from, to) {
                Some(path) => {
                    if let Some(links) = path.links(&view) {
                        committed.push(links);
                    }
                    outcome.paths.insert((ue, direction), path);
                }
                None => outcome.unrouted.push((ue, direction)),
            }
        }
        lg = update_network(radio, base, &committed)?;
    }
    Ok(outcome)
}

/// Shortest-hop routes through the geographically closest AP or the BS.
pub fn closest_ap_routes(
    s: &NetworkScenario,
    demand: impl Fn(NodeId, Direction) -> Demand,
) -> Vec<Route> {
    let Some(bs) = s.bs() else {
        return Vec::new();
    };
    let mut routes = Vec::new();
    for ue in s.ues() {
        let serving = s
            .nodes
            .iter()
            .filter(|n| n.role.is_infrastructure())
            .min_by(|a, b| {
                ue.distance_to(a)
                    .total_cmp(&ue.distance_to(b))
                    .then(a.id.cmp(&b.id))
            })
            .expect("BS exists");
        let down: Vec<NodeId> = if serving.role == Role::Bs {
            vec![bs.id, ue.id]
        } else {
            vec![bs.id, serving.id, ue.id]
        };
        let mut up = down.clone();
        up.reverse();
        for (direction, nodes) in [(Direction::Downlink, down), (Direction::Uplink, up)] {
            routes.push(Route {
                ue: ue.id,
                direction,
                nodes,
                demand: demand(ue.id, direction),
            });
        }
    }
    routes
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::build_link_graph_with;
    use crate::simulate::scenario::figure_one;

    fn graph(edges: &[(u32, u32, f64)]) -> LinkGraph {
        LinkGraph::from_weighted_edges([], edges)
    }

    #[test]
    fn chain() {
        let p = select_path(&graph(&[(0, 1, 5.0), (1, 2, 3.0)]), NodeId(0), NodeId(2)).unwrap();
        assert_eq!(p.nodes, vec![NodeId(0), NodeId(1), NodeId(2)]);
        assert_eq!(p.weight, 3.0);
    }

    #[test]
    fn parallel_paths_pick_wider() {
        let g = graph(&[(0, 1, 2.0), (1, 3, 9.0), (0, 2, 4.0), (2, 3, 7.0)]);
        let p = select_path(&g, NodeId(0), NodeId(3)).unwrap();
        assert_eq!(p.nodes, vec![NodeId(0), NodeId(2), NodeId(3)]);
        assert_eq!(p.weight, 4.0);
        // Same with the wide path listed through the lower id.
        let g = graph(&[(0, 1, 4.0), (1, 3, 9.0), (0, 2, 2.0), (2, 3, 7.0)]);
        assert_eq!(select_path(&g, NodeId(0), NodeId(3)).unwrap().weight, 4.0);
    }

    #[test]
    fn direct_edge() {
        let p = select_path(&graph(&[(0, 1, 6.5)]), NodeId(0), NodeId(1)).unwrap();
        assert_eq!(p.nodes, vec![NodeId(0), NodeId(1)]);
        assert_eq!(p.weight, 6.5);
    }

    #[test]
    fn unreachable_and_degenerate() {
        let g = LinkGraph::from_weighted_edges([NodeId(5)], &[(0, 1, 1.0)]);
        assert!(select_path(&g, NodeId(0), NodeId(5)).is_none());
        assert!(select_path(&g, NodeId(0), NodeId(0)).is_none());
        assert!(select_path(&g, NodeId(0), NodeId(9)).is_none());
    }

    #[test]
    fn ties_prefer_fewer_hops() {
        // 0->3 directly (w 4) and 0->1->3 (w 4): the one-hop path wins.
        let g = graph(&[(0, 1, 4.0), (1, 3, 4.0), (0, 3, 4.0)]);
        let p = select_path(&g, NodeId(0), NodeId(3)).unwrap();
        assert_eq!(p.nodes, vec![NodeId(0), NodeId(3)]);
    }

    #[test]
    fn never_below_direct_edge() {
        let g = graph(&[
            (0, 1, 10.0),
            (1, 2, 1.0),
            (0, 2, 3.0),
            (1, 3, 8.0),
            (3, 2, 8.0),
        ]);
        let p = select_path(&g, NodeId(0), NodeId(2)).unwrap();
        assert!(p.weight >= 3.0);
        assert_eq!(p.weight, 3.0);
    }

    #[test]
    fn later_improvement_updates_width() {
        // Node 2 is first reached with width 1, then improved to 5 in the same layer.
        let g = graph(&[
            (0, 1, 1.0),
            (0, 3, 5.0),
            (1, 2, 9.0),
            (3, 2, 9.0),
            (2, 4, 9.0),
        ]);
        let p = select_path(&g, NodeId(0), NodeId(4)).unwrap();
        assert_eq!(p.weight, 5.0);
        assert_eq!(p.nodes, vec![NodeId(0), NodeId(3), NodeId(2), NodeId(4)]);
    }

    #[test]
    fn update_network_properties() {
        let s = figure_one();
        let radio = RadioMap::new(&s).unwrap();
        let base = build_link_graph_with(&s, &radio).unwrap();
        let empty = update_network(&radio, &base, &[]).unwrap();
        for e in empty.edges() {
            assert_eq!(e.weight, radio.single_link_capacity(radio.link(e.link)));
        }
        let committed = vec![s.route_links(&s.routes[0]).unwrap()];
        let after = update_network(&radio, &base, &committed).unwrap();
        for (a, b) in empty.edges().iter().zip(after.edges()) {
            assert!(b.weight <= a.weight, "{} rose", a.link);
        }
        assert_eq!(update_network(&radio, &base, &committed).unwrap(), after);
    }

    #[test]
    fn single_ue_matches_select_path() {
        let s = figure_one();
        let radio = RadioMap::new(&s).unwrap();
        let base = build_link_graph_with(&s, &radio).unwrap();
        let ue = NodeId(3);
        let out = dynamic_routing(&s, &radio, &base, &[ue]).unwrap();
        let view = flow_view(&s, &base, ue, Direction::Downlink);
        let direct = select_path(&view, s.bs().unwrap().id, ue).unwrap();
        assert_eq!(out.paths[&(ue, Direction::Downlink)], direct);
        assert!(out.unrouted.is_empty());
    }

    #[test]
    fn closest_routes_are_valid() {
        let mut s = figure_one();
        s.routes = closest_ap_routes(&s, |_, _| Demand::FullBuffer);
        assert_eq!(s.routes.len(), 8);
        assert_eq!(crate::model::validate_scenario(&s), vec![]);
    }
}
