//! Domain types shared by every stage: parameters, nodes, links, routes and
//! the scenario document that ties them together.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::channel;
use crate::error::{Error, Result};

/// Version written into the header of every scenario file.
pub const SCENARIO_SCHEMA_VERSION: u32 = 1;

/// Physical-layer and frame parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemParams {
    /// Frame length in seconds.
    pub frame_length: f64,
    /// Carrier frequency in Hz.
    pub carrier_freq: f64,
    /// Speed of light in m/s.
    pub light_speed: f64,
    pub pathloss_exp_los: f64,
    pub pathloss_exp_nlos: f64,
    /// Log-normal shadowing standard deviation (dB) for LOS links.
    pub shadow_sigma_los_db: f64,
    /// Log-normal shadowing standard deviation (dB) for NLOS links.
    pub shadow_sigma_nlos_db: f64,
    /// LOS-probability breakpoint distances in meters.
    pub d1: f64,
    pub d2: f64,
    /// Thermal noise power in W.
    pub noise_power: f64,
    /// Pairwise interference power (W) above which two links conflict.
    pub interference_threshold: f64,
    /// System bandwidth in Hz.
    pub system_bandwidth: f64,
    pub slots_per_frame: u32,
    pub p_max_bs: f64,
    pub p_max_ap: f64,
    pub p_max_ue: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            frame_length: 10e-3,
            carrier_freq: 28e9,
            light_speed: 3e8,
            pathloss_exp_los: 2.1,
            pathloss_exp_nlos: 3.17,
            shadow_sigma_los_db: 2.38,
            shadow_sigma_nlos_db: 6.44,
            d1: 20.0,
            d2: 39.0,
            noise_power: 2e-11,
            interference_threshold: 1e-8,
            system_bandwidth: 1e9,
            slots_per_frame: 100,
            p_max_bs: 1.0,
            p_max_ap: 1.0,
            p_max_ue: 0.1,
        }
    }
}

impl SystemParams {
    pub fn slot_duration(&self) -> f64 {
        self.frame_length / f64::from(self.slots_per_frame)
    }

    /// Default transmit power budget for a role.
    pub fn p_max_for(&self, role: Role) -> f64 {
        match role {
            Role::Bs => self.p_max_bs,
            Role::Ap => self.p_max_ap,
            Role::Ue | Role::Vehicle => self.p_max_ue,
        }
    }

    fn positive_fields(&self) -> [(&'static str, f64); 15] {
        [
            ("frame_length", self.frame_length),
            ("carrier_freq", self.carrier_freq),
            ("light_speed", self.light_speed),
            ("pathloss_exp_los", self.pathloss_exp_los),
            ("pathloss_exp_nlos", self.pathloss_exp_nlos),
            ("shadow_sigma_los_db", self.shadow_sigma_los_db),
            ("shadow_sigma_nlos_db", self.shadow_sigma_nlos_db),
            ("d1", self.d1),
            ("d2", self.d2),
            ("noise_power", self.noise_power),
            ("interference_threshold", self.interference_threshold),
            ("system_bandwidth", self.system_bandwidth),
            ("p_max_bs", self.p_max_bs),
            ("p_max_ap", self.p_max_ap),
            ("p_max_ue", self.p_max_ue),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

/// Index of a link inside [`NetworkScenario::links`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LinkId(pub usize);

impl fmt::Display for LinkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "l{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Bs,
    Ap,
    Ue,
    Vehicle,
}

impl Role {
    pub fn is_infrastructure(self) -> bool {
        matches!(self, Role::Bs | Role::Ap)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Duplex {
    Half,
    /// Simultaneous transmit and receive with perfect isolation.
    FullPerfect,
    /// Simultaneous transmit and receive with residual self-interference.
    FullResidual,
}

impl Duplex {
    pub fn is_full(self) -> bool {
        !matches!(self, Duplex::Half)
    }
}

/// Planar antenna array, `rows` (vertical) by `cols` (horizontal) elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AntennaArray {
    pub rows: u32,
    pub cols: u32,
}

impl AntennaArray {
    pub const fn new(rows: u32, cols: u32) -> Self {
        Self { rows, cols }
    }

    pub fn for_role(role: Role) -> Self {
        match role {
            Role::Bs | Role::Ap => Self::new(16, 8),
            Role::Ue | Role::Vehicle => Self::new(4, 4),
        }
    }

    pub fn elements(&self) -> u32 {
        self.rows * self.cols
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub role: Role,
    /// Planar position in meters.
    pub position: [f64; 2],
    pub antenna: AntennaArray,
    /// Transmit power budget in W.
    pub p_max: f64,
    pub duplex: Duplex,
}

impl Node {
    /// A node with the role's default antenna, power budget and half duplex.
    pub fn new(id: NodeId, role: Role, position: [f64; 2], params: &SystemParams) -> Self {
        Self {
            id,
            role,
            position,
            antenna: AntennaArray::for_role(role),
            p_max: params.p_max_for(role),
            duplex: Duplex::Half,
        }
    }

    pub fn distance_to(&self, other: &Node) -> f64 {
        distance(self.position, other.position)
    }
}

pub fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    Downlink,
    Uplink,
}

/// Per-frame traffic demand carried by a link or a flow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Demand {
    FullBuffer,
    Bits(f64),
}

impl Demand {
    pub fn is_full_buffer(&self) -> bool {
        matches!(self, Demand::FullBuffer)
    }

    /// Aggregate demand of several flows sharing a link.
    pub fn combine(self, other: Demand) -> Demand {
        match (self, other) {
            (Demand::Bits(a), Demand::Bits(b)) => Demand::Bits(a + b),
            _ => Demand::FullBuffer,
        }
    }
}

/// A directed transmitter-to-receiver pair, the unit of scheduling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub id: LinkId,
    pub tx: NodeId,
    pub rx: NodeId,
    pub distance: f64,
    pub los: bool,
    pub shadow_db: f64,
    pub pathloss_linear: f64,
    pub direction: Direction,
    pub demand: Demand,
}

impl Link {
    /// Builds a link whose pathloss is computed from its propagation state.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        id: LinkId,
        tx: NodeId,
        rx: NodeId,
        distance: f64,
        los: bool,
        shadow_db: f64,
        direction: Direction,
        demand: Demand,
        params: &SystemParams,
    ) -> Result<Self> {
        let pathloss_linear = channel::pathloss(distance, los, shadow_db, params)?;
        Ok(Self {
            id,
            tx,
            rx,
            distance,
            los,
            shadow_db,
            pathloss_linear,
            direction,
            demand,
        })
    }

    pub fn shares_node(&self, other: &Link) -> bool {
        self.tx == other.tx || self.tx == other.rx || self.rx == other.tx || self.rx == other.rx
    }
}

/// An end-to-end flow between the BS and a UE (or vehicle).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Route {
    pub ue: NodeId,
    pub direction: Direction,
    /// Ordered node path from source to destination.
    pub nodes: Vec<NodeId>,
    pub demand: Demand,
}

impl Route {
    pub fn hops(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.nodes.windows(2).map(|w| (w[0], w[1]))
    }
}

/// Propagation state of a node pair fixed by the geometry instead of drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairState {
    pub a: NodeId,
    pub b: NodeId,
    pub los: bool,
    pub shadow_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkScenario {
    pub params: SystemParams,
    pub nodes: Vec<Node>,
    pub links: Vec<Link>,
    #[serde(default)]
    pub routes: Vec<Route>,
    #[serde(default)]
    pub pair_states: Vec<PairState>,
    pub rng_seed: u64,
}

#[derive(Serialize, Deserialize)]
struct ScenarioDocument {
    schema_version: u32,
    scenario: NetworkScenario,
}

impl NetworkScenario {
    pub fn node(&self, id: NodeId) -> Option<&Node> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn link(&self, id: LinkId) -> &Link {
        &self.links[id.0]
    }

    pub fn bs(&self) -> Option<&Node> {
        self.nodes.iter().find(|n| n.role == Role::Bs)
    }

    /// The link carrying traffic from `tx` to `rx` in `direction`.
    pub fn find_link(&self, tx: NodeId, rx: NodeId, direction: Direction) -> Option<&Link> {
        self.links
            .iter()
            .find(|l| l.tx == tx && l.rx == rx && l.direction == direction)
    }

    /// Link ids traversed by a route, or `None` if a hop has no link.
    pub fn route_links(&self, route: &Route) -> Option<Vec<LinkId>> {
        route
            .hops()
            .map(|(a, b)| self.find_link(a, b, route.direction).map(|l| l.id))
            .collect()
    }

    pub fn ues(&self) -> impl Iterator<Item = &Node> {
        self.nodes
            .iter()
            .filter(|n| matches!(n.role, Role::Ue | Role::Vehicle))
    }

    pub fn to_toml(&self) -> Result<String> {
        let doc = ScenarioDocument {
            schema_version: SCENARIO_SCHEMA_VERSION,
            scenario: self.clone(),
        };
        toml::to_string(&doc).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let doc: ScenarioDocument =
            toml::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        if doc.schema_version != SCENARIO_SCHEMA_VERSION {
            return Err(Error::Format(format!(
                "unsupported scenario schema_version {} (expected {})",
                doc.schema_version, SCENARIO_SCHEMA_VERSION
            )));
        }
        Ok(doc.scenario)
    }
}

/// A broken scenario invariant, naming the offending entity.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NonPositiveParam(&'static str),
    NoSlots,
    MissingBs,
    MultipleBs(Vec<NodeId>),
    DuplicateNode(NodeId),
    BadAntenna(NodeId),
    NonPositivePower(NodeId),
    LinkIdOutOfOrder {
        index: usize,
        id: LinkId,
    },
    SelfLink(LinkId),
    UnknownEndpoint {
        link: LinkId,
        node: NodeId,
    },
    NonPositiveDistance(LinkId),
    PathlossMismatch(LinkId),
    DuplicateLink(LinkId),
    RouteTooShort(NodeId),
    RouteNotAnchored(NodeId),
    RouteDirectionMismatch(NodeId),
    RouteEdgeAbsent {
        ue: NodeId,
        from: NodeId,
        to: NodeId,
    },
    DuplicateRoute(NodeId, Direction),
}

impl Violation {
    /// Short, stable label for the kind of violation.
    pub fn kind(&self) -> &'static str {
        match self {
            Violation::NonPositiveParam(_) => "non-positive parameter",
            Violation::NoSlots => "no slots per frame",
            Violation::MissingBs => "missing BS",
            Violation::MultipleBs(_) => "multiple BS",
            Violation::DuplicateNode(_) => "duplicate node id",
            Violation::BadAntenna(_) => "empty antenna array",
            Violation::NonPositivePower(_) => "non-positive power budget",
            Violation::LinkIdOutOfOrder { .. } => "link id out of order",
            Violation::SelfLink(_) => "self link",
            Violation::UnknownEndpoint { .. } => "unknown link endpoint",
            Violation::NonPositiveDistance(_) => "non-positive link distance",
            Violation::PathlossMismatch(_) => "pathloss inconsistent",
            Violation::DuplicateLink(_) => "duplicate link",
            Violation::RouteTooShort(_) => "route too short",
            Violation::RouteNotAnchored(_) => "route not anchored at BS",
            Violation::RouteDirectionMismatch(_) => "route direction mismatch",
            Violation::RouteEdgeAbsent { .. } => "route edge absent",
            Violation::DuplicateRoute(..) => "duplicate route",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = self.kind();
        match self {
            Violation::NonPositiveParam(name) => write!(f, "{kind}: {name}"),
            Violation::NoSlots | Violation::MissingBs => write!(f, "{kind}"),
            Violation::MultipleBs(ids) => {
                let ids: Vec<String> = ids.iter().map(ToString::to_string).collect();
                write!(f, "{kind}: {}", ids.join(", "))
            }
            Violation::DuplicateNode(id)
            | Violation::BadAntenna(id)
            | Violation::NonPositivePower(id) => write!(f, "{kind}: {id}"),
            Violation::LinkIdOutOfOrder { index, id } => {
                write!(f, "{kind}: position {index} holds {id}")
            }
            Violation::SelfLink(id)
            | Violation::NonPositiveDistance(id)
            | Violation::PathlossMismatch(id)
            | Violation::DuplicateLink(id) => write!(f, "{kind}: {id}"),
            Violation::UnknownEndpoint { link, node } => write!(f, "{kind}: {link} -> {node}"),
            Violation::RouteTooShort(ue)
            | Violation::RouteNotAnchored(ue)
            | Violation::RouteDirectionMismatch(ue) => write!(f, "{kind}: route of {ue}"),
            Violation::RouteEdgeAbsent { ue, from, to } => {
                write!(f, "{kind}: route of {ue} uses {from}->{to}")
            }
            Violation::DuplicateRoute(ue, dir) => write!(f, "{kind}: {ue} {dir:?}"),
        }
    }
}

const PATHLOSS_REL_TOL: f64 = 1e-9;

/// Checks every scenario invariant and returns the violations found.
pub fn validate_scenario(s: &NetworkScenario) -> Vec<Violation> {
    let mut out = Vec::new();
    let p = &s.params;

    for (name, value) in p.positive_fields() {
        if !(value > 0.0 && value.is_finite()) {
            out.push(Violation::NonPositiveParam(name));
        }
    }
    if p.slots_per_frame == 0 {
        out.push(Violation::NoSlots);
    }

    let mut ids = BTreeSet::new();
    for n in &s.nodes {
        if !ids.insert(n.id) {
            out.push(Violation::DuplicateNode(n.id));
        }
        if n.antenna.rows == 0 || n.antenna.cols == 0 {
            out.push(Violation::BadAntenna(n.id));
        }
        if !(n.p_max > 0.0) {
            out.push(Violation::NonPositivePower(n.id));
        }
    }
    let bs: Vec<NodeId> = s
        .nodes
        .iter()
        .filter(|n| n.role == Role::Bs)
        .map(|n| n.id)
        .collect();
    match bs.len() {
        0 => out.push(Violation::MissingBs),
        1 => {}
        _ => out.push(Violation::MultipleBs(bs.clone())),
    }

    let mut seen = BTreeSet::new();
    for (index, l) in s.links.iter().enumerate() {
        if l.id != LinkId(index) {
            out.push(Violation::LinkIdOutOfOrder { index, id: l.id });
        }
        if l.tx == l.rx {
            out.push(Violation::SelfLink(l.id));
        }
        for end in [l.tx, l.rx] {
            if !ids.contains(&end) {
                out.push(Violation::UnknownEndpoint {
                    link: l.id,
                    node: end,
                });
            }
        }
        if !(l.distance > 0.0) {
            out.push(Violation::NonPositiveDistance(l.id));
        } else {
            let consistent = channel::pathloss(l.distance, l.los, l.shadow_db, p)
                .map(|expected| (expected - l.pathloss_linear).abs() <= PATHLOSS_REL_TOL * expected)
                .unwrap_or(false);
            if !consistent {
                out.push(Violation::PathlossMismatch(l.id));
            }
        }
        if !seen.insert((l.tx, l.rx, l.direction)) {
            out.push(Violation::DuplicateLink(l.id));
        }
    }

    let bs_id = bs.first().copied();
    let mut route_keys = BTreeMap::new();
    for r in &s.routes {
        if route_keys.insert((r.ue, r.direction), ()).is_some() {
            out.push(Violation::DuplicateRoute(r.ue, r.direction));
        }
        if r.nodes.len() < 2 {
            out.push(Violation::RouteTooShort(r.ue));
            continue;
        }
        let starts = Some(r.nodes[0]) == bs_id;
        let ends = r.nodes.last().copied() == bs_id;
        if !(starts || ends) {
            out.push(Violation::RouteNotAnchored(r.ue));
        }
        // Traffic flowing away from the BS is downlink.
        let expected = if starts {
            Direction::Downlink
        } else {
            Direction::Uplink
        };
        if (starts || ends) && r.direction != expected {
            out.push(Violation::RouteDirectionMismatch(r.ue));
        }
        for (from, to) in r.hops() {
            if s.find_link(from, to, r.direction).is_none() {
                out.push(Violation::RouteEdgeAbsent { ue: r.ue, from, to });
            }
        }
    }
    out
}
