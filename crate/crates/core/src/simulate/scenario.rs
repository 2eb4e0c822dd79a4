//! Scenario generators: the small reference network, the Manhattan grid and
//! the vehicle platoon.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{pair_link_state, pair_shadow};
use crate::error::{Error, Result};
use crate::graphs::is_admissible;
use crate::model::{
    distance, Demand, Direction, Duplex, Link, LinkId, NetworkScenario, Node, NodeId, PairState,
    Role, Route, SystemParams,
};
use crate::routing::closest_ap_routes;

/// Which nodes run full duplex, and how well they cancel self-interference.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DuplexPreset {
    #[default]
    Half,
    FullResidualAp,
    FullResidualApBs,
    FullPerfectAp,
    FullPerfectApBs,
}

impl DuplexPreset {
    pub const ALL: [DuplexPreset; 5] = [
        DuplexPreset::Half,
        DuplexPreset::FullResidualAp,
        DuplexPreset::FullResidualApBs,
        DuplexPreset::FullPerfectAp,
        DuplexPreset::FullPerfectApBs,
    ];

    pub fn label(self) -> &'static str {
        match self {
            DuplexPreset::Half => "half",
            DuplexPreset::FullResidualAp => "full-residual-ap",
            DuplexPreset::FullResidualApBs => "full-residual-ap-bs",
            DuplexPreset::FullPerfectAp => "full-perfect-ap",
            DuplexPreset::FullPerfectApBs => "full-perfect-ap-bs",
        }
    }

    /// Duplex mode this preset gives a node of `role`.
    pub fn mode_for(self, role: Role) -> Duplex {
        let (mode, with_bs) = match self {
            DuplexPreset::Half => return Duplex::Half,
            DuplexPreset::FullResidualAp => (Duplex::FullResidual, false),
            DuplexPreset::FullResidualApBs => (Duplex::FullResidual, true),
            DuplexPreset::FullPerfectAp => (Duplex::FullPerfect, false),
            DuplexPreset::FullPerfectApBs => (Duplex::FullPerfect, true),
        };
        match role {
            Role::Ap => mode,
            Role::Bs if with_bs => mode,
            _ => Duplex::Half,
        }
    }
}

/// Sets every BS/AP duplex mode according to `preset`; other nodes are untouched.
pub fn apply_duplex(s: &mut NetworkScenario, preset: DuplexPreset) {
    for n in &mut s.nodes {
        if n.role.is_infrastructure() {
            n.duplex = preset.mode_for(n.role);
        }
    }
}

fn push_pair(
    links: &mut Vec<Link>,
    seed: u64,
    upstream: &Node,
    downstream: &Node,
    params: &SystemParams,
) -> Result<()> {
    let d = upstream.distance_to(downstream);
    let state = pair_link_state(seed, upstream.id, downstream.id, d, params)?;
    push_pair_with(links, upstream, downstream, state, params)
}

fn push_pair_with(
    links: &mut Vec<Link>,
    upstream: &Node,
    downstream: &Node,
    (los, shadow): (bool, f64),
    params: &SystemParams,
) -> Result<()> {
    let d = upstream.distance_to(downstream);
    for (tx, rx, direction) in [
        (upstream.id, downstream.id, Direction::Downlink),
        (downstream.id, upstream.id, Direction::Uplink),
    ] {
        let id = LinkId(links.len());
        links.push(Link::new(
            id,
            tx,
            rx,
            d,
            los,
            shadow,
            direction,
            Demand::FullBuffer,
            params,
        )?);
    }
    Ok(())
}

/// The reference network: one BS, two APs and four UEs, seven node pairs.
pub fn figure_one() -> NetworkScenario {
    let params = SystemParams::default();
    let seed = 2019;
    let at = |id: u32, role, pos| Node::new(NodeId(id), role, pos, &params);
    let nodes = vec![
        at(0, Role::Bs, [0.0, 0.0]),
        at(1, Role::Ap, [120.0, 0.0]),
        at(2, Role::Ap, [0.0, 120.0]),
        at(3, Role::Ue, [160.0, 30.0]),
        at(4, Role::Ue, [150.0, -40.0]),
        at(5, Role::Ue, [30.0, 170.0]),
        at(6, Role::Ue, [-30.0, 40.0]),
    ];
    let pairs = [(0, 1), (0, 2), (1, 3), (1, 4), (2, 5), (0, 6), (2, 6)];
    let mut links = Vec::new();
    for (a, b) in pairs {
        push_pair(&mut links, seed, &nodes[a], &nodes[b], &params).expect("positive distances");
    }
    let mut s = NetworkScenario {
        params,
        nodes,
        links,
        routes: Vec::new(),
        pair_states: Vec::new(),
        rng_seed: seed,
    };
    s.routes = closest_ap_routes(&s, |_, _| Demand::FullBuffer);
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ManhattanConfig {
    /// Blocks along each side of the square grid.
    pub blocks_per_side: u32,
    /// Block edge length in meters.
    pub block_length: f64,
    pub street_width: f64,
    pub ap_count: u32,
    pub ue_count: u32,
}

impl Default for ManhattanConfig {
    fn default() -> Self {
        Self {
            blocks_per_side: 2,
            block_length: 200.0,
            street_width: 30.0,
            ap_count: 9,
            ue_count: 100,
        }
    }
}

impl ManhattanConfig {
    fn pitch(&self) -> f64 {
        self.block_length + self.street_width
    }

    fn validate(&self) -> Result<()> {
        if self.blocks_per_side == 0 || !(self.block_length > 0.0) || !(self.street_width > 0.0) {
            return Err(Error::Config(
                "manhattan grid dimensions must be positive".into(),
            ));
        }
        Ok(())
    }

    /// BS crossroad and the AP sites: remaining crossroads nearest the BS
    /// first, then street midpoints if the crossroads run out.
    pub fn sites(&self) -> ([f64; 2], Vec<[f64; 2]>) {
        let pitch = self.pitch();
        let k = self.blocks_per_side;
        let c = f64::from(k / 2) * pitch;
        let bs = [c, c];
        let mut crossroads = Vec::new();
        let mut midpoints = Vec::new();
        for i in 0..=k {
            for j in 0..=k {
                let p = [f64::from(i) * pitch, f64::from(j) * pitch];
                if p != bs {
                    crossroads.push(p);
                }
                if i < k {
                    midpoints.push([(f64::from(i) + 0.5) * pitch, f64::from(j) * pitch]);
                }
                if j < k {
                    midpoints.push([f64::from(i) * pitch, (f64::from(j) + 0.5) * pitch]);
                }
            }
        }
        let order = |v: &mut Vec<[f64; 2]>| {
            v.sort_by(|a, b| {
                distance(*a, bs)
                    .total_cmp(&distance(*b, bs))
                    .then(a[0].total_cmp(&b[0]))
                    .then(a[1].total_cmp(&b[1]))
            })
        };
        order(&mut crossroads);
        order(&mut midpoints);
        let aps = crossroads
            .into_iter()
            .chain(midpoints)
            .take(self.ap_count as usize)
            .collect();
        (bs, aps)
    }

    /// Whether `p` lies on a street.
    pub fn on_street(&self, p: [f64; 2]) -> bool {
        let pitch = self.pitch();
        let half = self.street_width / 2.0;
        let near = |x: f64| {
            let r = x.rem_euclid(pitch);
            r <= half || pitch - r <= half
        };
        let lo = -half;
        let hi = f64::from(self.blocks_per_side) * pitch + half;
        (lo..=hi).contains(&p[0]) && (lo..=hi).contains(&p[1]) && (near(p[0]) || near(p[1]))
    }
}

/// Manhattan grid with the BS at the central crossroad, APs at the other
/// crossroads and UEs dropped uniformly on the streets.
pub fn generate_manhattan<R: Rng + ?Sized>(
    cfg: &ManhattanConfig,
    params: &SystemParams,
    rng: &mut R,
) -> Result<NetworkScenario> {
    cfg.validate()?;
    let (bs_pos, ap_pos) = cfg.sites();
    let half = cfg.street_width / 2.0;
    let extent = f64::from(cfg.blocks_per_side) * cfg.pitch();

    let mut nodes = vec![Node::new(NodeId(0), Role::Bs, bs_pos, params)];
    for (i, p) in ap_pos.iter().enumerate() {
        nodes.push(Node::new(NodeId(1 + i as u32), Role::Ap, *p, params));
    }
    let first_ue = 1 + ap_pos.len() as u32;
    for i in 0..cfg.ue_count {
        let p = loop {
            let p = [
                rng.random_range(-half..=extent + half),
                rng.random_range(-half..=extent + half),
            ];
            if cfg.on_street(p) {
                break p;
            }
        };
        nodes.push(Node::new(NodeId(first_ue + i), Role::Ue, p, params));
    }
    let seed: u64 = rng.random();

    let bs = nodes[0].clone();
    let mut links = Vec::new();
    for a in 0..nodes.len() {
        for b in (a + 1)..nodes.len() {
            let (na, nb) = (&nodes[a], &nodes[b]);
            if !is_admissible(na.role, nb.role) || na.distance_to(nb) <= 0.0 {
                continue;
            }
            let (da, db) = (na.distance_to(&bs), nb.distance_to(&bs));
            let a_upstream = match (na.role, nb.role) {
                (Role::Bs, _) | (Role::Ap, Role::Ue) => true,
                (_, Role::Bs) | (Role::Ue, Role::Ap) => false,
                _ if (da - db).abs() < 1e-9 => continue,
                _ => da < db,
            };
            let (up, down) = if a_upstream { (na, nb) } else { (nb, na) };
            push_pair(&mut links, seed, up, down, params)?;
        }
    }
    let mut s = NetworkScenario {
        params: params.clone(),
        nodes,
        links,
        routes: Vec::new(),
        pair_states: Vec::new(),
        rng_seed: seed,
    };
    s.routes = closest_ap_routes(&s, |_, _| Demand::FullBuffer);
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlatoonConfig {
    pub n_vehicles: u32,
    pub speed_kmh: f64,
    /// The first this-many vehicles transmit and receive simultaneously.
    pub bt_enabled_count: u32,
    /// Lateral offset of the roadside BS from the lane, meters.
    pub bs_offset: f64,
}

impl Default for PlatoonConfig {
    fn default() -> Self {
        Self {
            n_vehicles: 10,
            speed_kmh: 50.0,
            bt_enabled_count: 0,
            bs_offset: 20.0,
        }
    }
}

impl PlatoonConfig {
    /// Gap between adjacent vehicles: two seconds of travel.
    pub fn spacing(&self) -> f64 {
        self.speed_kmh / 3.6 * 2.0
    }
}

/// A line of vehicles led past a roadside BS, relaying hop by hop.
pub fn generate_platoon(
    cfg: &PlatoonConfig,
    params: &SystemParams,
    seed: u64,
) -> Result<NetworkScenario> {
    if cfg.n_vehicles < 2 {
        return Err(Error::Config(
            "a platoon needs at least two vehicles".into(),
        ));
    }
    if !(cfg.speed_kmh > 0.0) {
        return Err(Error::Config("platoon speed must be positive".into()));
    }
    let gap = cfg.spacing();
    let mut nodes = vec![Node::new(
        NodeId(0),
        Role::Bs,
        [-gap, cfg.bs_offset],
        params,
    )];
    for i in 0..cfg.n_vehicles {
        let mut v = Node::new(
            NodeId(1 + i),
            Role::Vehicle,
            [f64::from(i) * gap, 0.0],
            params,
        );
        if i < cfg.bt_enabled_count {
            v.duplex = Duplex::FullPerfect;
        }
        nodes.push(v);
    }
    let mut links = Vec::new();
    for i in 1..nodes.len() {
        push_pair(&mut links, seed, &nodes[0], &nodes[i], params)?;
    }
    // Neighbours in the lane see each other; a vehicle in between blocks the rest.
    let mut pair_states = Vec::new();
    for i in 1..nodes.len() {
        for j in i + 1..nodes.len() {
            let los = j == i + 1;
            let shadow_db = pair_shadow(seed, nodes[i].id, nodes[j].id, los, params)?;
            if los {
                push_pair_with(&mut links, &nodes[i], &nodes[j], (los, shadow_db), params)?;
            } else {
                pair_states.push(PairState {
                    a: nodes[i].id,
                    b: nodes[j].id,
                    los,
                    shadow_db,
                });
            }
        }
    }
    let mut routes = Vec::new();
    for j in 1..nodes.len() {
        let down: Vec<NodeId> = (0..=j).map(|k| nodes[k].id).collect();
        let mut up = down.clone();
        up.reverse();
        let ue = nodes[j].id;
        routes.push(Route {
            ue,
            direction: Direction::Downlink,
            nodes: down,
            demand: Demand::FullBuffer,
        });
        routes.push(Route {
            ue,
            direction: Direction::Uplink,
            nodes: up,
            demand: Demand::FullBuffer,
        });
    }
    Ok(NetworkScenario {
        params: params.clone(),
        nodes,
        links,
        routes,
        pair_states,
        rng_seed: seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_scenario;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn manhattan(ues: u32, seed: u64) -> NetworkScenario {
        let cfg = ManhattanConfig {
            ue_count: ues,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        generate_manhattan(&cfg, &SystemParams::default(), &mut rng).unwrap()
    }

    #[test]
    fn default_manhattan_counts() {
        let s = manhattan(100, 1);
        let count = |r| s.nodes.iter().filter(|n| n.role == r).count();
        assert_eq!(count(Role::Bs), 1);
        assert_eq!(count(Role::Ap), 9);
        assert_eq!(count(Role::Ue), 100);
        assert_eq!(validate_scenario(&s), vec![]);
        assert_eq!(s.routes.len(), 200);
        let cfg = ManhattanConfig::default();
        assert!(s.ues().all(|u| cfg.on_street(u.position)));
    }

    #[test]
    fn manhattan_sites() {
        let (bs, aps) = ManhattanConfig::default().sites();
        assert_eq!(bs, [230.0, 230.0]);
        assert_eq!(aps.len(), 9);
        let crossroads = aps
            .iter()
            .filter(|p| p[0] % 230.0 == 0.0 && p[1] % 230.0 == 0.0)
            .count();
        assert_eq!(crossroads, 8);
    }

    #[test]
    fn empty_access_layer() {
        let s = manhattan(0, 3);
        assert_eq!(s.ues().count(), 0);
        assert!(s.routes.is_empty());
        assert!(s
            .links
            .iter()
            .all(|l| s.node(l.tx).unwrap().role.is_infrastructure()
                && s.node(l.rx).unwrap().role.is_infrastructure()));
        assert_eq!(validate_scenario(&s), vec![]);
    }

    #[test]
    fn manhattan_is_deterministic() {
        assert_eq!(manhattan(30, 9), manhattan(30, 9));
        assert_ne!(manhattan(30, 9), manhattan(30, 10));
    }

    #[test]
    fn platoon_layout() {
        let cfg = PlatoonConfig::default();
        assert!((cfg.spacing() - 27.777_777_777_777_78).abs() < 1e-9);
        let s = generate_platoon(&cfg, &SystemParams::default(), 4).unwrap();
        assert_eq!(validate_scenario(&s), vec![]);
        assert_eq!(s.routes.len(), 20);
        assert!(s.nodes.iter().all(|n| n.duplex == Duplex::Half));
        let bt = PlatoonConfig {
            bt_enabled_count: 10,
            ..cfg.clone()
        };
        let s = generate_platoon(&bt, &SystemParams::default(), 4).unwrap();
        assert!(s.ues().all(|n| n.duplex == Duplex::FullPerfect));
        assert!(generate_platoon(
            &PlatoonConfig {
                n_vehicles: 1,
                ..cfg
            },
            &SystemParams::default(),
            4
        )
        .is_err());
    }

    #[test]
    fn duplex_presets() {
        let mut s = figure_one();
        apply_duplex(&mut s, DuplexPreset::FullResidualAp);
        assert_eq!(s.bs().unwrap().duplex, Duplex::Half);
        assert!(s
            .nodes
            .iter()
            .filter(|n| n.role == Role::Ap)
            .all(|n| n.duplex == Duplex::FullResidual));
        apply_duplex(&mut s, DuplexPreset::FullPerfectApBs);
        assert_eq!(s.bs().unwrap().duplex, Duplex::FullPerfect);
        assert!(s.ues().all(|n| n.duplex == Duplex::Half));
    }
}
