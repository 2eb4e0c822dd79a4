//! Per-frame engine: slot and power allocation under each scheme, and the
//! resulting link and flow rates.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::channel::RadioMap;
use crate::error::{Error, Result};
use crate::model::{Demand, Direction, LinkId, NetworkScenario, NodeId, Route};
use crate::plan::{group_links, GroupedLinks, SchedulePlan, SwitchMode};
use crate::resources::slots_for_bits;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Jsra,
    Tdma,
    RoundRobin,
    PropFair,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [
        Scheme::Jsra,
        Scheme::Tdma,
        Scheme::RoundRobin,
        Scheme::PropFair,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Scheme::Jsra => "jsra",
            Scheme::Tdma => "tdma",
            Scheme::RoundRobin => "round-robin",
            Scheme::PropFair => "prop-fair",
        }
    }
}

/// An end-to-end flow and the links it traverses.
#[derive(Debug, Clone, PartialEq)]
pub struct Flow {
    pub ue: NodeId,
    pub direction: Direction,
    pub links: Vec<LinkId>,
    pub demand: Demand,
}

/// Links that transmit together for `slots` slots of the frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Unit {
    pub links: Vec<LinkId>,
    pub slots: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameAllocation {
    pub units: Vec<Unit>,
    pub unit_of: BTreeMap<LinkId, usize>,
    /// Achievable rate of each link over the frame, bits/s.
    pub link_rate: BTreeMap<LinkId, f64>,
    /// Sum of in-unit rate times slots.
    pub objective: f64,
    pub plan: Option<SchedulePlan>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowRate {
    pub ue: NodeId,
    pub direction: Direction,
    pub rate: f64,
    /// False when the flow offered no traffic this frame.
    pub active: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameMetrics {
    pub per_link_rate: BTreeMap<LinkId, f64>,
    pub objective: f64,
    pub per_node_switch_point: BTreeMap<NodeId, f64>,
    pub per_packet_latency: Vec<f64>,
    pub group_count: usize,
    pub flow_rates: Vec<FlowRate>,
}

/// Scheduler memory carried from frame to frame by the baselines.
#[derive(Debug, Clone, Default)]
pub struct BaselineState {
    next: usize,
    average: BTreeMap<LinkId, f64>,
}

/// Averaging window of the proportional-fair throughput estimate, in slots.
const PF_WINDOW: f64 = 100.0;

/// Precomputed per-snapshot state shared by every frame and scheme.
#[derive(Debug, Clone)]
pub struct FrameEngine {
    radio: RadioMap,
    flows: Vec<Flow>,
    links: Vec<LinkId>,
    flows_on: BTreeMap<LinkId, Vec<usize>>,
    single: BTreeMap<LinkId, f64>,
    grouped: GroupedLinks,
    mode: SwitchMode,
}

impl FrameEngine {
    pub fn new(s: &NetworkScenario, routes: &[Route], mode: SwitchMode) -> Result<Self> {
        let radio = RadioMap::new(s)?;
        Self::with_radio(s, radio, routes, mode)
    }

    pub fn with_radio(
        s: &NetworkScenario,
        radio: RadioMap,
        routes: &[Route],
        mode: SwitchMode,
    ) -> Result<Self> {
        let mut flows = Vec::with_capacity(routes.len());
        for r in routes {
            let links = s.route_links(r).ok_or_else(|| {
                Error::Domain(format!("route of {} uses a hop with no link", r.ue))
            })?;
            flows.push(Flow {
                ue: r.ue,
                direction: r.direction,
                links,
                demand: r.demand,
            });
        }
        let mut flows_on: BTreeMap<LinkId, Vec<usize>> = BTreeMap::new();
        for (i, f) in flows.iter().enumerate() {
            for &l in &f.links {
                flows_on.entry(l).or_default().push(i);
            }
        }
        let links: Vec<LinkId> = flows_on.keys().copied().collect();
        let single = links
            .iter()
            .map(|&l| (l, radio.single_link_capacity(radio.link(l))))
            .collect();
        let grouped = group_links(&radio, &links)?;
        Ok(Self {
            radio,
            flows,
            links,
            flows_on,
            single,
            grouped,
            mode,
        })
    }

    pub fn radio(&self) -> &RadioMap {
        &self.radio
    }

    pub fn flows(&self) -> &[Flow] {
        &self.flows
    }

    pub fn links(&self) -> &[LinkId] {
        &self.links
    }

    pub fn grouped(&self) -> &GroupedLinks {
        &self.grouped
    }

    pub fn single_capacity(&self, link: LinkId) -> f64 {
        self.single[&link]
    }

    fn n(&self) -> u32 {
        self.radio.params().slots_per_frame
    }

    /// Bits per link implied by per-flow bits.
    pub fn link_bits(&self, flow_bits: &[f64]) -> BTreeMap<LinkId, f64> {
        self.links
            .iter()
            .map(|l| (*l, self.flows_on[l].iter().map(|&f| flow_bits[f]).sum()))
            .collect()
    }

    /// Slots each link needs alone; `None` means full buffer everywhere.
    pub fn required(&self, link_bits: Option<&BTreeMap<LinkId, f64>>) -> BTreeMap<LinkId, u32> {
        let p = self.radio.params();
        self.links
            .iter()
            .map(|&l| {
                let r = match link_bits {
                    None => 1,
                    Some(bits) => slots_for_bits(
                        bits[&l],
                        self.single[&l],
                        p.slot_duration(),
                        p.slots_per_frame,
                    ),
                };
                (l, r)
            })
            .collect()
    }

    pub fn jsra_plan(&self, required: &BTreeMap<LinkId, u32>) -> Result<SchedulePlan> {
        self.grouped.plan(&self.radio, required, self.mode)
    }

    /// Plan over the links that need at least one slot; `None` when none do.
    pub fn jsra_plan_active(
        &self,
        required: &BTreeMap<LinkId, u32>,
    ) -> Result<Option<SchedulePlan>> {
        let active: BTreeMap<LinkId, u32> = required
            .iter()
            .filter(|(_, &r)| r > 0)
            .map(|(&l, &r)| (l, r))
            .collect();
        if active.is_empty() {
            return Ok(None);
        }
        if active.len() == self.links.len() {
            return self.jsra_plan(&active).map(Some);
        }
        let links: Vec<LinkId> = active.keys().copied().collect();
        let grouped = group_links(&self.radio, &links)?;
        grouped.plan(&self.radio, &active, self.mode).map(Some)
    }

    pub fn allocate(
        &self,
        scheme: Scheme,
        link_bits: Option<&BTreeMap<LinkId, f64>>,
        state: &mut BaselineState,
    ) -> Result<FrameAllocation> {
        if self.links.is_empty() {
            return Ok(FrameAllocation {
                units: Vec::new(),
                unit_of: BTreeMap::new(),
                link_rate: BTreeMap::new(),
                objective: 0.0,
                plan: None,
            });
        }
        let required = self.required(link_bits);
        let n = f64::from(self.n());
        match scheme {
            Scheme::Jsra => {
                let Some(plan) = self.jsra_plan_active(&required)? else {
                    return Ok(self.singleton_allocation(&vec![0.0; self.links.len()]));
                };
                let mut units = Vec::new();
                let mut unit_of = BTreeMap::new();
                for (k, g) in plan.groups.groups.iter().enumerate() {
                    for &l in g {
                        unit_of.insert(l, k);
                    }
                    units.push(Unit {
                        links: g.clone(),
                        slots: f64::from(plan.slots.per_group_slots[k]),
                    });
                }
                Ok(FrameAllocation {
                    units,
                    unit_of,
                    link_rate: self
                        .links
                        .iter()
                        .map(|&l| {
                            (
                                l,
                                if plan.capacity.contains_key(&l) {
                                    plan.link_rate(l)
                                } else {
                                    0.0
                                },
                            )
                        })
                        .collect(),
                    objective: plan.objective(),
                    plan: Some(plan),
                })
            }
            Scheme::Tdma => {
                let total: u32 = required.values().sum();
                let shares: Vec<f64> = self
                    .links
                    .iter()
                    .map(|l| {
                        if total == 0 {
                            0.0
                        } else {
                            f64::from(required[l]) / f64::from(total) * n
                        }
                    })
                    .collect();
                Ok(self.singleton_allocation(&shares))
            }
            Scheme::RoundRobin | Scheme::PropFair => {
                let mut need: Vec<u32> = self
                    .links
                    .iter()
                    .map(|l| {
                        if link_bits.is_none() {
                            u32::MAX
                        } else {
                            required[l]
                        }
                    })
                    .collect();
                let mut counts = vec![0.0; self.links.len()];
                for _ in 0..self.n() {
                    let pick = if scheme == Scheme::RoundRobin {
                        self.pick_round_robin(&need, state)
                    } else {
                        self.pick_prop_fair(&need, state)
                    };
                    if let Some(i) = pick {
                        counts[i] += 1.0;
                        need[i] -= 1;
                    }
                }
                Ok(self.singleton_allocation(&counts))
            }
        }
    }

    fn pick_round_robin(&self, need: &[u32], state: &mut BaselineState) -> Option<usize> {
        let m = self.links.len();
        let start = state.next % m;
        let i = (0..m).map(|o| (start + o) % m).find(|&i| need[i] > 0)?;
        state.next = i + 1;
        Some(i)
    }

    fn pick_prop_fair(&self, need: &[u32], state: &mut BaselineState) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, l) in self.links.iter().enumerate() {
            if need[i] == 0 {
                continue;
            }
            let cap = self.single[l];
            let avg = *state.average.entry(*l).or_insert(cap);
            let metric = if avg > 0.0 { cap / avg } else { f64::INFINITY };
            if best.is_none_or(|(_, m)| metric > m) {
                best = Some((i, metric));
            }
        }
        let beta = 1.0 / PF_WINDOW;
        for (i, l) in self.links.iter().enumerate() {
            let served = if best.map(|b| b.0) == Some(i) {
                self.single[l]
            } else {
                0.0
            };
            let cap = self.single[l];
            let avg = state.average.entry(*l).or_insert(cap);
            *avg = (1.0 - beta) * *avg + beta * served;
        }
        best.map(|b| b.0)
    }

    /// One link per unit, each at full power on the whole band.
    fn singleton_allocation(&self, slots: &[f64]) -> FrameAllocation {
        let n = f64::from(self.n());
        let mut units = Vec::new();
        let mut unit_of = BTreeMap::new();
        let mut link_rate = BTreeMap::new();
        let mut objective = 0.0;
        for (i, (&l, &s)) in self.links.iter().zip(slots).enumerate() {
            units.push(Unit {
                links: vec![l],
                slots: s,
            });
            unit_of.insert(l, i);
            link_rate.insert(l, self.single[&l] * s / n);
            objective += self.single[&l] * s;
        }
        FrameAllocation {
            units,
            unit_of,
            link_rate,
            objective,
            plan: None,
        }
    }

    /// Rate of every flow: its share of each link, limited by the weakest hop.
    pub fn flow_rates(&self, alloc: &FrameAllocation, flow_bits: Option<&[f64]>) -> Vec<FlowRate> {
        let frame = self.radio.params().frame_length;
        self.flows
            .iter()
            .enumerate()
            .map(|(f, flow)| {
                let active = flow_bits.is_none_or(|b| b[f] > 0.0);
                let mut rate = match flow_bits {
                    None => f64::INFINITY,
                    Some(b) => b[f] / frame,
                };
                for l in &flow.links {
                    let on = &self.flows_on[l];
                    let share = match flow_bits {
                        None => 1.0 / on.len() as f64,
                        Some(b) => {
                            let total: f64 = on.iter().map(|&g| b[g]).sum();
                            if total > 0.0 {
                                b[f] / total
                            } else {
                                0.0
                            }
                        }
                    };
                    rate = rate.min(alloc.link_rate[l] * share);
                }
                if !rate.is_finite() {
                    rate = 0.0;
                }
                FlowRate {
                    ue: flow.ue,
                    direction: flow.direction,
                    rate,
                    active,
                }
            })
            .collect()
    }

    /// Fraction of each node's traffic-carrying slots that are downlink.
    pub fn switch_points(
        &self,
        alloc: &FrameAllocation,
        carries: impl Fn(LinkId) -> bool,
    ) -> BTreeMap<NodeId, f64> {
        let mut tally: BTreeMap<NodeId, (f64, f64)> = BTreeMap::new();
        for unit in &alloc.units {
            if unit.slots <= 0.0 {
                continue;
            }
            let mut seen: BTreeMap<NodeId, (bool, bool)> = BTreeMap::new();
            for &l in unit.links.iter().filter(|&&l| carries(l)) {
                let link = self.radio.link(l);
                for node in [link.tx, link.rx] {
                    let e = seen.entry(node).or_default();
                    match link.direction {
                        Direction::Downlink => e.0 = true,
                        Direction::Uplink => e.1 = true,
                    }
                }
            }
            for (node, (dl, ul)) in seen {
                let t = tally.entry(node).or_default();
                match (dl, ul) {
                    (true, false) => t.0 += unit.slots,
                    (false, true) => t.1 += unit.slots,
                    _ => {
                        t.0 += unit.slots / 2.0;
                        t.1 += unit.slots / 2.0;
                    }
                }
            }
        }
        tally
            .into_iter()
            .filter(|(_, (dl, ul))| dl + ul > 0.0)
            .map(|(n, (dl, ul))| (n, dl / (dl + ul)))
            .collect()
    }

    /// Metrics of one frame; `flow_bits` of `None` means full buffer.
    pub fn run_frame(
        &self,
        scheme: Scheme,
        flow_bits: Option<&[f64]>,
        state: &mut BaselineState,
    ) -> Result<FrameMetrics> {
        let link_bits = flow_bits.map(|b| self.link_bits(b));
        let alloc = self.allocate(scheme, link_bits.as_ref(), state)?;
        let carries = |l: LinkId| link_bits.as_ref().is_none_or(|b| b[&l] > 0.0);
        Ok(FrameMetrics {
            per_node_switch_point: self.switch_points(&alloc, carries),
            flow_rates: self.flow_rates(&alloc, flow_bits),
            per_link_rate: alloc.link_rate.clone(),
            objective: alloc.objective,
            per_packet_latency: Vec::new(),
            group_count: alloc.units.iter().filter(|u| u.slots > 0.0).count(),
        })
    }
}

/// Metrics of one full-buffer frame for `scheme` on the scenario's own routes.
pub fn run_frame(s: &NetworkScenario, routes: &[Route], scheme: Scheme) -> Result<FrameMetrics> {
    let engine = FrameEngine::new(s, routes, SwitchMode::Flexible)?;
    engine.run_frame(scheme, None, &mut BaselineState::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::scenario::figure_one;

    #[test]
    fn objective_matches_link_rates() {
        let s = figure_one();
        for scheme in Scheme::ALL {
            let m = run_frame(&s, &s.routes, scheme).unwrap();
            let n = f64::from(s.params.slots_per_frame);
            let sum: f64 = m.per_link_rate.values().map(|r| r * n).sum();
            assert!(
                (sum - m.objective).abs() <= 1e-9 * m.objective,
                "{scheme:?}"
            );
            assert!(m.per_link_rate.values().all(|&r| r >= 0.0));
            assert!(m
                .per_node_switch_point
                .values()
                .all(|&x| (0.0..=1.0).contains(&x)));
        }
    }

    #[test]
    fn single_link_all_schemes_agree() {
        let s = figure_one();
        let route = vec![s
            .routes
            .iter()
            .find(|r| r.nodes.len() == 2)
            .unwrap()
            .clone()];
        let base = run_frame(&s, &route, Scheme::Jsra).unwrap();
        for scheme in Scheme::ALL {
            let m = run_frame(&s, &route, scheme).unwrap();
            assert_eq!(m.flow_rates.len(), 1);
            let a = m.flow_rates[0].rate;
            let b = base.flow_rates[0].rate;
            assert!((a - b).abs() <= 1e-9 * b, "{scheme:?} {a} {b}");
            assert!((m.objective - base.objective).abs() <= 1e-9 * base.objective);
        }
    }

    #[test]
    fn jsra_reuses_more_link_slots_than_tdma() {
        let s = figure_one();
        let engine = FrameEngine::new(&s, &s.routes, SwitchMode::Flexible).unwrap();
        let mut st = BaselineState::default();
        let jsra = engine.allocate(Scheme::Jsra, None, &mut st).unwrap();
        let tdma = engine.allocate(Scheme::Tdma, None, &mut st).unwrap();
        let link_slots = |a: &FrameAllocation| -> f64 {
            a.units.iter().map(|u| u.slots * u.links.len() as f64).sum()
        };
        assert!(link_slots(&jsra) > link_slots(&tdma));
        assert!((link_slots(&tdma) - 100.0).abs() < 1e-9);
    }

    #[test]
    fn all_downlink_switch_point_is_one() {
        let s = figure_one();
        let engine = FrameEngine::new(&s, &s.routes, SwitchMode::Flexible).unwrap();
        let bits: Vec<f64> = engine
            .flows()
            .iter()
            .map(|f| {
                if f.direction == Direction::Downlink {
                    2e6
                } else {
                    0.0
                }
            })
            .collect();
        for scheme in Scheme::ALL {
            let m = engine
                .run_frame(scheme, Some(&bits), &mut BaselineState::default())
                .unwrap();
            assert!(!m.per_node_switch_point.is_empty());
            assert!(
                m.per_node_switch_point.values().all(|&x| x == 1.0),
                "{scheme:?}"
            );
        }
    }
}
