//! Propagation, antenna gain, SINR and Shannon capacity.

use std::collections::HashMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::model::{distance, AntennaArray, Duplex, Link, NetworkScenario, NodeId, SystemParams};

/// Gain outside the main lobe of the flat-top pattern (-10 dB).
pub const SIDELOBE_GAIN: f64 = 0.1;

/// Residual self-interference coupling of a full-duplex node (-110 dB).
pub const SELF_INTERFERENCE_COUPLING: f64 = 1e-11;

/// Cross-path distances are clamped to this floor so co-sited nodes stay finite.
const MIN_DISTANCE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    pub rx_power: f64,
    pub interference_power: f64,
    pub sinr: f64,
    pub bandwidth: f64,
}

/// `(4 pi f / c)^2`, the free-space factor at one meter.
pub fn free_space_factor(params: &SystemParams) -> f64 {
    (4.0 * PI * params.carrier_freq / params.light_speed).powi(2)
}

/// Linear isotropic pathloss `(4 pi f / c)^2 * d^n * 10^(shadow/10)`.
pub fn pathloss(d: f64, los: bool, shadow_db: f64, params: &SystemParams) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::Domain(format!(
            "pathloss distance must be positive, got {d}"
        )));
    }
    let exponent = if los {
        params.pathloss_exp_los
    } else {
        params.pathloss_exp_nlos
    };
    Ok(free_space_factor(params) * d.powf(exponent) * 10f64.powf(shadow_db / 10.0))
}

/// Probability that a link of length `d` is line-of-sight (d1/d2 model).
pub fn los_probability(d: f64, params: &SystemParams) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::Domain(format!(
            "LOS distance must be positive, got {d}"
        )));
    }
    let tail = (-d / params.d2).exp();
    let p = (params.d1 / d).min(1.0) * (1.0 - tail) + tail;
    Ok(p.clamp(0.0, 1.0))
}

/// Draws the LOS state and log-normal shadowing (dB) of a link.
pub fn sample_link_state<R: Rng + ?Sized>(
    d: f64,
    params: &SystemParams,
    rng: &mut R,
) -> Result<(bool, f64)> {
    let p = los_probability(d, params)?;
    let los = rng.random::<f64>() < p;
    let sigma = if los {
        params.shadow_sigma_los_db
    } else {
        params.shadow_sigma_nlos_db
    };
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::Domain(e.to_string()))?;
    Ok((los, normal.sample(rng)))
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Propagation state of the unordered node pair `{a, b}`.
///
/// Keyed on the scenario seed and the pair alone, so both directions of a
/// link and every interference path see one reciprocal channel.
pub fn pair_link_state(
    seed: u64,
    a: NodeId,
    b: NodeId,
    d: f64,
    params: &SystemParams,
) -> Result<(bool, f64)> {
    let (lo, hi) = if a <= b { (a.0, b.0) } else { (b.0, a.0) };
    let key = splitmix64(seed ^ splitmix64((u64::from(lo) << 32) | u64::from(hi)));
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    sample_link_state(d, params, &mut rng)
}

/// Shadowing of the pair `{a, b}` when its LOS state is already known.
pub fn pair_shadow(
    seed: u64,
    a: NodeId,
    b: NodeId,
    los: bool,
    params: &SystemParams,
) -> Result<f64> {
    let (lo, hi) = if a <= b { (a.0, b.0) } else { (b.0, a.0) };
    let key = splitmix64(!seed ^ splitmix64((u64::from(lo) << 32) | u64::from(hi)));
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    let sigma = if los {
        params.shadow_sigma_los_db
    } else {
        params.shadow_sigma_nlos_db
    };
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::Domain(e.to_string()))?;
    Ok(normal.sample(&mut rng))
}

/// Gain of one flat-top array at `offset` radians off boresight.
pub fn element_gain(array: AntennaArray, offset: f64) -> f64 {
    let beamwidth = 2.0 * PI / f64::from(array.rows.max(array.cols));
    if offset.abs() <= beamwidth / 2.0 {
        f64::from(array.elements())
    } else {
        SIDELOBE_GAIN
    }
}

/// Combined transmit/receive gain of a link with the given off-boresight angles.
pub fn antenna_gain(tx: AntennaArray, rx: AntennaArray, tx_offset: f64, rx_offset: f64) -> f64 {
    element_gain(tx, tx_offset) * element_gain(rx, rx_offset)
}

/// Shannon capacity in bits/s; zero unless the link is scheduled.
pub fn link_capacity(bandwidth: f64, sinr: f64, scheduled: bool) -> f64 {
    let indicator = if scheduled { 1.0 } else { 0.0 };
    bandwidth * (1.0 + indicator * sinr).log2()
}

/// Angle in `[0, pi]` at `origin` between the directions to `aim` and `toward`.
pub fn angular_offset(origin: [f64; 2], aim: [f64; 2], toward: [f64; 2]) -> f64 {
    let a = [aim[0] - origin[0], aim[1] - origin[1]];
    let b = [toward[0] - origin[0], toward[1] - origin[1]];
    let na = a[0].hypot(a[1]);
    let nb = b[0].hypot(b[1]);
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let cos = ((a[0] * b[0] + a[1] * b[1]) / (na * nb)).clamp(-1.0, 1.0);
    cos.acos()
}

#[derive(Debug, Clone)]
struct RadioNode {
    position: [f64; 2],
    antenna: AntennaArray,
    p_max: f64,
    duplex: Duplex,
}

/// Channel view of a scenario: node geometry plus the pathloss of every node pair.
#[derive(Debug, Clone)]
pub struct RadioMap {
    params: SystemParams,
    index: HashMap<NodeId, usize>,
    nodes: Vec<RadioNode>,
    /// Row-major `n x n` pathloss matrix; the diagonal is unused.
    pathloss: Vec<f64>,
    links: Vec<Link>,
}

impl RadioMap {
    pub fn new(s: &NetworkScenario) -> Result<Self> {
        let n = s.nodes.len();
        let index: HashMap<NodeId, usize> = s
            .nodes
            .iter()
            .enumerate()
            .map(|(i, node)| (node.id, i))
            .collect();
        let nodes: Vec<RadioNode> = s
            .nodes
            .iter()
            .map(|node| RadioNode {
                position: node.position,
                antenna: node.antenna,
                p_max: node.p_max,
                duplex: node.duplex,
            })
            .collect();
        let mut pathloss = vec![f64::INFINITY; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = distance(nodes[i].position, nodes[j].position).max(MIN_DISTANCE);
                let (los, shadow) =
                    pair_link_state(s.rng_seed, s.nodes[i].id, s.nodes[j].id, d, &s.params)?;
                let l = self::pathloss(d, los, shadow, &s.params)?;
                pathloss[i * n + j] = l;
                pathloss[j * n + i] = l;
            }
        }
        for st in &s.pair_states {
            let (Some(&i), Some(&j)) = (index.get(&st.a), index.get(&st.b)) else {
                continue;
            };
            let d = distance(nodes[i].position, nodes[j].position).max(MIN_DISTANCE);
            let l = self::pathloss(d, st.los, st.shadow_db, &s.params)?;
            pathloss[i * n + j] = l;
            pathloss[j * n + i] = l;
        }
        // A link's own stored state is authoritative for its node pair.
        for link in &s.links {
            let (Some(&i), Some(&j)) = (index.get(&link.tx), index.get(&link.rx)) else {
                continue;
            };
            pathloss[i * n + j] = link.pathloss_linear;
            pathloss[j * n + i] = link.pathloss_linear;
        }
        Ok(Self {
            params: s.params.clone(),
            index,
            nodes,
            pathloss,
            links: s.links.clone(),
        })
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn link(&self, id: crate::model::LinkId) -> &Link {
        &self.links[id.0]
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    fn idx(&self, id: NodeId) -> usize {
        self.index[&id]
    }

    pub fn p_max(&self, id: NodeId) -> f64 {
        self.nodes[self.idx(id)].p_max
    }

    pub fn duplex(&self, id: NodeId) -> Duplex {
        self.nodes[self.idx(id)].duplex
    }

    pub fn position(&self, id: NodeId) -> [f64; 2] {
        self.nodes[self.idx(id)].position
    }

    pub fn pair_pathloss(&self, a: NodeId, b: NodeId) -> f64 {
        let n = self.nodes.len();
        self.pathloss[self.idx(a) * n + self.idx(b)]
    }

    /// Boresight gain of a link toward its own receiver.
    pub fn boresight_gain(&self, link: &Link) -> f64 {
        let tx = &self.nodes[self.idx(link.tx)];
        let rx = &self.nodes[self.idx(link.rx)];
        antenna_gain(tx.antenna, rx.antenna, 0.0, 0.0)
    }

    /// Power (W) that `interferer` transmitting at `p_tx` delivers into the
    /// receiver of `victim`, with both beams pointed at their own peers.
    pub fn interference(&self, victim: &Link, interferer: &Link, p_tx: f64) -> f64 {
        if interferer.tx == victim.rx {
            // The victim's receiver is itself transmitting.
            return match self.duplex(victim.rx) {
                Duplex::FullPerfect => 0.0,
                Duplex::FullResidual => p_tx * SELF_INTERFERENCE_COUPLING,
                Duplex::Half => p_tx,
            };
        }
        let tx = &self.nodes[self.idx(interferer.tx)];
        let rx = &self.nodes[self.idx(victim.rx)];
        let tx_aim = self.position(interferer.rx);
        let rx_aim = self.position(victim.tx);
        let tx_offset = angular_offset(tx.position, tx_aim, rx.position);
        let rx_offset = angular_offset(rx.position, rx_aim, tx.position);
        let gain = antenna_gain(tx.antenna, rx.antenna, tx_offset, rx_offset);
        p_tx * gain / self.pair_pathloss(interferer.tx, victim.rx)
    }

    /// Signal, interference and SINR of `link` at transmit power `p_tx`.
    pub fn link_sinr(&self, link: &Link, p_tx: f64, interferers: &[(&Link, f64)]) -> LinkBudget {
        let rx_power = p_tx * self.boresight_gain(link) / link.pathloss_linear;
        let interference_power: f64 = interferers
            .iter()
            .filter(|(other, _)| other.id != link.id)
            .map(|(other, p)| self.interference(link, other, *p))
            .sum();
        LinkBudget {
            rx_power,
            interference_power,
            sinr: rx_power / (self.params.noise_power + interference_power),
            bandwidth: self.params.system_bandwidth,
        }
    }

    /// Interference-free capacity of a link alone on the whole band at full power.
    pub fn single_link_capacity(&self, link: &Link) -> f64 {
        let budget = self.link_sinr(link, self.p_max(link.tx), &[]);
        link_capacity(budget.bandwidth, budget.sinr, true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Demand, Direction, LinkId, Node, Role};
    use rand::SeedableRng;

    fn params() -> SystemParams {
        SystemParams::default()
    }

    #[test]
    fn unit_distance_pathloss() {
        let p = params();
        let expected = (4.0 * PI * 28e9 / 3e8_f64).powi(2);
        let l = pathloss(1.0, true, 0.0, &p).unwrap();
        assert!((l - expected).abs() / expected < 1e-12);
        assert!((l - 1.376e6).abs() / 1.376e6 < 1e-3);
        assert!((10.0 * l.log10() - 61.4).abs() < 0.05);
        assert_eq!(pathloss(1.0, false, 0.0, &p).unwrap(), l);
    }

    #[test]
    fn nlos_pathloss_at_100m() {
        let p = params();
        let expected = free_space_factor(&p) * 100f64.powf(3.17);
        let l = pathloss(100.0, false, 0.0, &p).unwrap();
        assert!((l - expected).abs() / expected < 1e-12);
    }

    #[test]
    fn pathloss_rejects_non_positive_distance() {
        assert!(pathloss(0.0, true, 0.0, &params()).is_err());
        assert!(pathloss(-3.0, false, 0.0, &params()).is_err());
    }

    #[test]
    fn los_probability_values() {
        let p = params();
        assert_eq!(los_probability(20.0, &p).unwrap(), 1.0);
        assert_eq!(los_probability(5.0, &p).unwrap(), 1.0);
        let e = (-1.0f64).exp();
        let expected = (20.0 / 39.0) * (1.0 - e) + e;
        let got = los_probability(39.0, &p).unwrap();
        assert!((got - expected).abs() < 1e-15);
        assert!((got - 0.692).abs() < 1e-3);
        assert!(los_probability(1e5, &p).unwrap() < 1e-3);
    }

    #[test]
    fn short_links_are_always_los() {
        let p = params();
        for seed in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            assert!(sample_link_state(5.0, &p, &mut rng).unwrap().0);
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let p = params();
        let mut a = ChaCha8Rng::seed_from_u64(7);
        let mut b = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            assert_eq!(
                sample_link_state(60.0, &p, &mut a).unwrap(),
                sample_link_state(60.0, &p, &mut b).unwrap()
            );
        }
    }

    #[test]
    fn empirical_los_frequency_at_39m() {
        let p = params();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let draws = 100_000;
        let los = (0..draws)
            .filter(|_| sample_link_state(39.0, &p, &mut rng).unwrap().0)
            .count();
        let freq = los as f64 / draws as f64;
        assert!((freq - 0.692).abs() < 0.01, "{freq}");
    }

    #[test]
    fn pair_state_is_reciprocal() {
        let p = params();
        let a = pair_link_state(9, NodeId(3), NodeId(11), 120.0, &p).unwrap();
        let b = pair_link_state(9, NodeId(11), NodeId(3), 120.0, &p).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn boresight_gain_is_element_product() {
        let bs = AntennaArray::new(16, 8);
        let ue = AntennaArray::new(4, 4);
        assert_eq!(antenna_gain(bs, ue, 0.0, 0.0), 2048.0);
        assert_eq!(
            antenna_gain(bs, ue, 1.0, 2.0),
            SIDELOBE_GAIN * SIDELOBE_GAIN
        );
        for (a, b) in [(0.0, 0.5), (0.1, 3.0), (2.0, 0.2)] {
            assert_eq!(antenna_gain(bs, ue, a, b), antenna_gain(ue, bs, b, a));
        }
    }

    #[test]
    fn beamwidth_edges() {
        let bs = AntennaArray::new(16, 8);
        let half = PI / 16.0;
        assert_eq!(element_gain(bs, half), 128.0);
        assert_eq!(element_gain(bs, half + 1e-9), SIDELOBE_GAIN);
    }

    #[test]
    fn capacity_values() {
        assert_eq!(link_capacity(1e9, 5.0, false), 0.0);
        assert_eq!(link_capacity(1e9, 1.0, true), 1e9);
        assert_eq!(link_capacity(1e9, 3.0, true), 2e9);
        assert_eq!(link_capacity(1e9, 0.0, true), 0.0);
    }

    fn line_scenario() -> NetworkScenario {
        // Victim 0->1 plus two interferers transmitting from the same spot.
        let p = params();
        let mut nodes = vec![
            Node::new(NodeId(0), Role::Bs, [0.0, 0.0], &p),
            Node::new(NodeId(1), Role::Ue, [50.0, 0.0], &p),
            Node::new(NodeId(2), Role::Ap, [50.0, 40.0], &p),
            Node::new(NodeId(3), Role::Ue, [50.0, 80.0], &p),
            Node::new(NodeId(4), Role::Ap, [50.0, 40.0], &p),
        ];
        nodes[4].position = [50.0, 40.0];
        let mk = |id, tx: NodeId, rx: NodeId, nodes: &[Node]| {
            let d = distance(
                nodes.iter().find(|n| n.id == tx).unwrap().position,
                nodes.iter().find(|n| n.id == rx).unwrap().position,
            );
            Link::new(
                LinkId(id),
                tx,
                rx,
                d,
                true,
                0.0,
                Direction::Downlink,
                Demand::FullBuffer,
                &p,
            )
            .unwrap()
        };
        let links = vec![
            mk(0, NodeId(0), NodeId(1), &nodes),
            mk(1, NodeId(2), NodeId(3), &nodes),
            mk(2, NodeId(4), NodeId(3), &nodes),
        ];
        NetworkScenario {
            params: p,
            nodes,
            links,
            routes: vec![],
            pair_states: vec![],
            rng_seed: 1,
        }
    }

    #[test]
    fn sinr_without_interference() {
        let s = line_scenario();
        let radio = RadioMap::new(&s).unwrap();
        let link = &s.links[0];
        let b = radio.link_sinr(link, 0.5, &[]);
        let g = 2048.0;
        let expected = 0.5 * g / (link.pathloss_linear * s.params.noise_power);
        assert!((b.sinr - expected).abs() / expected < 1e-12);
        let zero = radio.link_sinr(link, 0.5, &[(&s.links[1], 0.0)]);
        assert_eq!(zero.sinr, b.sinr);
    }

    #[test]
    fn interference_is_additive() {
        let s = line_scenario();
        let radio = RadioMap::new(&s).unwrap();
        let one = radio.link_sinr(&s.links[0], 1.0, &[(&s.links[1], 1.0)]);
        let two = radio.link_sinr(&s.links[0], 1.0, &[(&s.links[1], 1.0), (&s.links[2], 1.0)]);
        assert!(one.interference_power > 0.0);
        let extra = radio.interference(&s.links[0], &s.links[2], 1.0);
        assert!(extra > 0.0);
        let sum = one.interference_power + extra;
        assert!((two.interference_power - sum).abs() <= 1e-12 * sum);
    }
}
