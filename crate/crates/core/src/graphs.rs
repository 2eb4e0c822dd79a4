//! Directed link graph and undirected conflict graph.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::channel::RadioMap;
use crate::error::{Error, Result};
use crate::model::{validate_scenario, Duplex, Link, LinkId, NetworkScenario, NodeId, Role};

#[derive(Debug, Clone, PartialEq)]
pub struct GraphEdge {
    pub link: LinkId,
    pub tx: NodeId,
    pub rx: NodeId,
    /// Achievable data rate in bits/s.
    pub weight: f64,
}

/// Directed graph over nodes whose edges are scenario links.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinkGraph {
    nodes: BTreeSet<NodeId>,
    edges: Vec<GraphEdge>,
    out: BTreeMap<NodeId, Vec<usize>>,
}

impl LinkGraph {
    pub fn new(nodes: impl IntoIterator<Item = NodeId>, edges: Vec<GraphEdge>) -> Self {
        let mut nodes: BTreeSet<NodeId> = nodes.into_iter().collect();
        let mut out: BTreeMap<NodeId, Vec<usize>> = BTreeMap::new();
        for (i, e) in edges.iter().enumerate() {
            nodes.insert(e.tx);
            nodes.insert(e.rx);
            out.entry(e.tx).or_default().push(i);
        }
        Self { nodes, edges, out }
    }

    /// Abstract graph from `(tx, rx, weight)` triples; link ids follow input order.
    pub fn from_weighted_edges(
        nodes: impl IntoIterator<Item = NodeId>,
        edges: &[(u32, u32, f64)],
    ) -> Self {
        let edges = edges
            .iter()
            .enumerate()
            .map(|(i, &(a, b, w))| GraphEdge {
                link: LinkId(i),
                tx: NodeId(a),
                rx: NodeId(b),
                weight: w,
            })
            .collect();
        Self::new(nodes, edges)
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.iter().copied()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn contains(&self, v: NodeId) -> bool {
        self.nodes.contains(&v)
    }

    pub fn edges(&self) -> &[GraphEdge] {
        &self.edges
    }

    pub fn out_edges(&self, v: NodeId) -> impl Iterator<Item = &GraphEdge> + '_ {
        self.out
            .get(&v)
            .into_iter()
            .flat_map(move |idx| idx.iter().map(move |&i| &self.edges[i]))
    }

    /// Heaviest edge from `a` to `b`, if any.
    pub fn edge_between(&self, a: NodeId, b: NodeId) -> Option<&GraphEdge> {
        self.out_edges(a)
            .filter(|e| e.rx == b)
            .max_by(|x, y| x.weight.total_cmp(&y.weight))
    }

    pub fn weight(&self, link: LinkId) -> Option<f64> {
        self.edges.iter().find(|e| e.link == link).map(|e| e.weight)
    }

    pub fn set_weights(&mut self, mut f: impl FnMut(&GraphEdge) -> f64) {
        for e in &mut self.edges {
            e.weight = f(e).max(0.0);
        }
    }

    /// Subgraph keeping the given nodes and the edges accepted by `keep`.
    pub fn restrict(&self, nodes: &BTreeSet<NodeId>, keep: impl Fn(&GraphEdge) -> bool) -> Self {
        let edges = self
            .edges
            .iter()
            .filter(|e| nodes.contains(&e.tx) && nodes.contains(&e.rx) && keep(e))
            .cloned()
            .collect();
        Self::new(
            nodes.iter().copied().filter(|n| self.nodes.contains(n)),
            edges,
        )
    }

    /// Same graph with one extra edge.
    pub fn with_edge(&self, tx: NodeId, rx: NodeId, weight: f64) -> Self {
        let mut edges = self.edges.clone();
        edges.push(GraphEdge {
            link: LinkId(edges.len()),
            tx,
            rx,
            weight,
        });
        Self::new(self.nodes.iter().copied(), edges)
    }
}

/// Whether a link between these roles belongs in the link graph.
pub fn is_admissible(a: Role, b: Role) -> bool {
    use Role::*;
    matches!(
        (a, b),
        (Bs, Ap)
            | (Ap, Bs)
            | (Bs, Ue)
            | (Ue, Bs)
            | (Ap, Ue)
            | (Ue, Ap)
            | (Ap, Ap)
            | (Vehicle, Vehicle)
            | (Bs, Vehicle)
            | (Vehicle, Bs)
    )
}

pub fn build_link_graph(s: &NetworkScenario) -> Result<LinkGraph> {
    let radio = RadioMap::new(s)?;
    build_link_graph_with(s, &radio)
}

/// Link graph weighted by single-link capacity at full power.
pub fn build_link_graph_with(s: &NetworkScenario, radio: &RadioMap) -> Result<LinkGraph> {
    let violations = validate_scenario(s);
    if !violations.is_empty() {
        return Err(Error::InvalidScenario(violations));
    }
    let role = |id: NodeId| s.node(id).map(|n| n.role);
    let edges = s
        .links
        .iter()
        .filter(|l| matches!((role(l.tx), role(l.rx)), (Some(a), Some(b)) if is_admissible(a, b)))
        .map(|l| GraphEdge {
            link: l.id,
            tx: l.tx,
            rx: l.rx,
            weight: radio.single_link_capacity(l),
        })
        .collect();
    Ok(LinkGraph::new(s.nodes.iter().map(|n| n.id), edges))
}

/// True iff a node shared by `i` and `j` would have to transmit and receive
/// at once without full-duplex support.
pub fn is_sequential(i: &Link, j: &Link, duplex_of: impl Fn(NodeId) -> Duplex) -> bool {
    let relay = |a: &Link, b: &Link| a.rx == b.tx && duplex_of(a.rx) == Duplex::Half;
    relay(i, j) || relay(j, i)
}

/// Undirected conflict graph with one vertex per link.
#[derive(Debug, Clone, PartialEq)]
pub struct ConflictGraph {
    vertices: Vec<LinkId>,
    index: BTreeMap<LinkId, usize>,
    adjacency: Vec<BTreeSet<usize>>,
}

impl ConflictGraph {
    pub fn new(mut vertices: Vec<LinkId>) -> Self {
        vertices.sort();
        vertices.dedup();
        let index = vertices.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let adjacency = vec![BTreeSet::new(); vertices.len()];
        Self {
            vertices,
            index,
            adjacency,
        }
    }

    /// Abstract graph on vertices `l0..l{n-1}`.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut g = Self::new((0..n).map(LinkId).collect());
        for &(a, b) in edges {
            g.add_edge(LinkId(a), LinkId(b));
        }
        g
    }

    /// Adds an undirected edge; self-loops and unknown vertices are ignored.
    pub fn add_edge(&mut self, a: LinkId, b: LinkId) {
        let (Some(&ia), Some(&ib)) = (self.index.get(&a), self.index.get(&b)) else {
            return;
        };
        if ia != ib {
            self.adjacency[ia].insert(ib);
            self.adjacency[ib].insert(ia);
        }
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Vertices in ascending link id order.
    pub fn vertices(&self) -> &[LinkId] {
        &self.vertices
    }

    pub fn position(&self, v: LinkId) -> Option<usize> {
        self.index.get(&v).copied()
    }

    pub fn has_edge(&self, a: LinkId, b: LinkId) -> bool {
        match (self.index.get(&a), self.index.get(&b)) {
            (Some(&ia), Some(&ib)) => self.adjacency[ia].contains(&ib),
            _ => false,
        }
    }

    pub fn degree(&self, v: LinkId) -> usize {
        self.index.get(&v).map_or(0, |&i| self.adjacency[i].len())
    }

    pub fn neighbors(&self, v: LinkId) -> impl Iterator<Item = LinkId> + '_ {
        self.index
            .get(&v)
            .into_iter()
            .flat_map(move |&i| self.adjacency[i].iter().map(move |&j| self.vertices[j]))
    }

    /// Neighbor positions of the vertex at position `i`.
    pub fn adjacent(&self, i: usize) -> &BTreeSet<usize> {
        &self.adjacency[i]
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(BTreeSet::len).max().unwrap_or(0)
    }

    pub fn average_degree(&self) -> f64 {
        if self.vertices.is_empty() {
            return 0.0;
        }
        2.0 * self.edge_count() as f64 / self.vertices.len() as f64
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(BTreeSet::len).sum::<usize>() / 2
    }

    /// Edges as `(a, b)` with `a < b`, sorted.
    pub fn edges(&self) -> Vec<(LinkId, LinkId)> {
        let mut out = Vec::with_capacity(self.edge_count());
        for (i, adj) in self.adjacency.iter().enumerate() {
            for &j in adj.range(i + 1..) {
                out.push((self.vertices[i], self.vertices[j]));
            }
        }
        out
    }

    /// Whitespace-separated edge list, one `a b` pair per line.
    pub fn to_edge_list(&self) -> String {
        let mut s = String::new();
        for (a, b) in self.edges() {
            let _ = writeln!(s, "{} {}", a.0, b.0);
        }
        s
    }
}

/// Conflict graph over `links`: sequential pairs plus pairs whose full-power
/// interference exceeds the threshold in either direction.
pub fn build_conflict_graph(radio: &RadioMap, links: &[LinkId]) -> ConflictGraph {
    build_conflict_graph_with_threshold(radio, links, radio.params().interference_threshold)
}

pub fn build_conflict_graph_with_threshold(
    radio: &RadioMap,
    links: &[LinkId],
    threshold: f64,
) -> ConflictGraph {
    let mut g = ConflictGraph::new(links.to_vec());
    let ids = g.vertices().to_vec();
    for (x, &a) in ids.iter().enumerate() {
        let la = radio.link(a);
        for &b in &ids[x + 1..] {
            let lb = radio.link(b);
            if conflicts(radio, la, lb, threshold) {
                g.add_edge(a, b);
            }
        }
    }
    g
}

fn conflicts(radio: &RadioMap, a: &Link, b: &Link, threshold: f64) -> bool {
    if is_sequential(a, b, |n| radio.duplex(n)) {
        return true;
    }
    let into_a = radio.interference(a, b, radio.p_max(b.tx));
    let into_b = radio.interference(b, a, radio.p_max(a.tx));
    into_a > threshold || into_b > threshold
}
