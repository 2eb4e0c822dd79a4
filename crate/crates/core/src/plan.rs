//! The joint scheduling and resource allocation pipeline and its feasibility checks.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::channel::{link_capacity, RadioMap};
use crate::error::Result;
use crate::graphs::{build_conflict_graph, ConflictGraph};
use crate::model::{Direction, LinkId, NodeId};
use crate::resources::{
    allocate_power, allocate_slots, allocate_slots_fixed_split, channel_quality, PowerAllocation,
    SlotAllocation,
};
use crate::scheduling::{cg_mis_schedule, validate_schedule, SdmaGroups};

/// How frame slots are divided between downlink and uplink.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SwitchMode {
    /// Slots follow demand.
    #[default]
    Flexible,
    /// Half the frame is reserved for downlink groups.
    Fixed,
}

/// Demand-independent part of a plan: grouping, powers and in-group rates.
#[derive(Debug, Clone)]
pub struct GroupedLinks {
    pub cg: ConflictGraph,
    pub groups: SdmaGroups,
    pub power: PowerAllocation,
    /// Shannon rate of each link while its group is active, bits/s.
    pub capacity: BTreeMap<LinkId, f64>,
    pub sinr: BTreeMap<LinkId, f64>,
}

/// A complete plan: groups, slot counts and per-link powers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchedulePlan {
    pub groups: SdmaGroups,
    pub slots: SlotAllocation,
    pub power: PowerAllocation,
    pub capacity: BTreeMap<LinkId, f64>,
    pub slots_per_frame: u32,
}

impl SchedulePlan {
    pub fn slots_of(&self, link: LinkId) -> u32 {
        self.groups
            .group_of(link)
            .map_or(0, |k| self.slots.per_group_slots[k])
    }

    /// Achievable rate `r * n / N` in bits/s.
    pub fn link_rate(&self, link: LinkId) -> f64 {
        let r = self.capacity.get(&link).copied().unwrap_or(0.0);
        r * f64::from(self.slots_of(link)) / f64::from(self.slots_per_frame)
    }

    /// Sum over links of `r * n`.
    pub fn objective(&self) -> f64 {
        self.capacity
            .iter()
            .map(|(&l, &r)| r * f64::from(self.slots_of(l)))
            .sum()
    }

    pub fn link_rates(&self) -> BTreeMap<LinkId, f64> {
        self.capacity
            .keys()
            .map(|&l| (l, self.link_rate(l)))
            .collect()
    }
}

/// Powers, water levels and rates for fixed groups.
pub fn evaluate_groups(
    radio: &RadioMap,
    groups: &SdmaGroups,
) -> Result<(
    PowerAllocation,
    BTreeMap<LinkId, f64>,
    BTreeMap<LinkId, f64>,
)> {
    let mut power = PowerAllocation::default();
    let mut capacity = BTreeMap::new();
    let mut sinr = BTreeMap::new();
    let bandwidth = radio.params().system_bandwidth;
    for (k, group) in groups.groups.iter().enumerate() {
        let mut by_sender: BTreeMap<NodeId, Vec<LinkId>> = BTreeMap::new();
        for &l in group {
            by_sender.entry(radio.link(l).tx).or_default().push(l);
        }
        for (&sender, links) in &by_sender {
            let gammas: Vec<f64> = links
                .iter()
                .map(|&l| channel_quality(radio.link(l), radio))
                .collect();
            let slice = allocate_power(&gammas, radio.p_max(sender))?;
            for (&l, &p) in links.iter().zip(&slice.powers) {
                power.per_link_power.insert(l, p);
            }
            power.water_level.insert((sender, k), slice.water_level);
        }
        let active: Vec<(&crate::model::Link, f64)> = group
            .iter()
            .map(|l| (radio.link(*l), power.per_link_power[l]))
            .collect();
        for &l in group {
            let link = radio.link(l);
            let share = by_sender[&link.tx].len() as f64;
            let budget = radio.link_sinr(link, power.per_link_power[&l], &active);
            sinr.insert(l, budget.sinr);
            capacity.insert(l, link_capacity(bandwidth / share, budget.sinr, true));
        }
    }
    Ok((power, capacity, sinr))
}

/// Conflict graph, greedy grouping and water-filled powers for `links`.
pub fn group_links(radio: &RadioMap, links: &[LinkId]) -> Result<GroupedLinks> {
    let cg = build_conflict_graph(radio, links);
    let groups = cg_mis_schedule(&cg);
    let (power, capacity, sinr) = evaluate_groups(radio, &groups)?;
    Ok(GroupedLinks {
        cg,
        groups,
        power,
        capacity,
        sinr,
    })
}

/// Whether a group carries mostly downlink traffic (ties count as downlink).
pub fn downlink_majority(radio: &RadioMap, group: &[LinkId]) -> bool {
    let dl = group
        .iter()
        .filter(|&&l| radio.link(l).direction == Direction::Downlink)
        .count();
    2 * dl >= group.len()
}

impl GroupedLinks {
    /// Completes the plan with slot counts for the given per-link needs.
    pub fn plan(
        &self,
        radio: &RadioMap,
        required: &BTreeMap<LinkId, u32>,
        mode: SwitchMode,
    ) -> Result<SchedulePlan> {
        let n = radio.params().slots_per_frame;
        let slots = match mode {
            SwitchMode::Flexible => allocate_slots(&self.groups, required, n)?,
            SwitchMode::Fixed => {
                let flags: Vec<bool> = self
                    .groups
                    .groups
                    .iter()
                    .map(|g| downlink_majority(radio, g))
                    .collect();
                allocate_slots_fixed_split(&self.groups, required, &flags, n)?
            }
        };
        Ok(SchedulePlan {
            groups: self.groups.clone(),
            slots,
            power: self.power.clone(),
            capacity: self.capacity.clone(),
            slots_per_frame: n,
        })
    }
}

/// A broken frame-plan constraint.
#[derive(Debug, Clone, PartialEq)]
pub enum PlanViolation {
    NotPartition,
    Conflict(LinkId, LinkId),
    SlotOverflow {
        total: u32,
        n: u32,
    },
    NegativePower(LinkId),
    PowerOverflow {
        sender: NodeId,
        group: usize,
        total: f64,
        p_max: f64,
    },
}

impl fmt::Display for PlanViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlanViolation::NotPartition => write!(f, "groups do not partition the links"),
            PlanViolation::Conflict(a, b) => {
                write!(f, "conflicting links {a} and {b} share a group")
            }
            PlanViolation::SlotOverflow { total, n } => {
                write!(f, "{total} slots allocated, frame has {n}")
            }
            PlanViolation::NegativePower(l) => write!(f, "negative power on {l}"),
            PlanViolation::PowerOverflow {
                sender,
                group,
                total,
                p_max,
            } => {
                write!(
                    f,
                    "{sender} uses {total} W in group {group}, budget {p_max} W"
                )
            }
        }
    }
}

const POWER_SLACK: f64 = 1e-12;

/// Checks partition, independence, slot budget and per-sender power budget.
pub fn check_plan(cg: &ConflictGraph, plan: &SchedulePlan, radio: &RadioMap) -> Vec<PlanViolation> {
    let mut out = Vec::new();
    if !validate_schedule(cg, &plan.groups) {
        let mut seen = BTreeSet::new();
        let partition = plan.groups.groups.iter().flatten().all(|l| seen.insert(*l))
            && seen.len() == cg.len()
            && seen.iter().all(|l| cg.position(*l).is_some());
        if !partition {
            out.push(PlanViolation::NotPartition);
        }
        for g in &plan.groups.groups {
            for (x, &a) in g.iter().enumerate() {
                for &b in &g[x + 1..] {
                    if cg.has_edge(a, b) {
                        out.push(PlanViolation::Conflict(a, b));
                    }
                }
            }
        }
    }
    let total = plan.slots.total();
    if total > plan.slots_per_frame {
        out.push(PlanViolation::SlotOverflow {
            total,
            n: plan.slots_per_frame,
        });
    }
    for (k, g) in plan.groups.groups.iter().enumerate() {
        let mut used: BTreeMap<NodeId, f64> = BTreeMap::new();
        for &l in g {
            let p = plan.power.per_link_power.get(&l).copied().unwrap_or(0.0);
            if p < 0.0 {
                out.push(PlanViolation::NegativePower(l));
            }
            *used.entry(radio.link(l).tx).or_default() += p;
        }
        for (sender, total) in used {
            let p_max = radio.p_max(sender);
            if total > p_max * (1.0 + POWER_SLACK) {
                out.push(PlanViolation::PowerOverflow {
                    sender,
                    group: k,
                    total,
                    p_max,
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Demand;
    use crate::resources::required_slots;
    use crate::simulate::scenario::figure_one;

    #[test]
    fn figure_one_plan_is_feasible() {
        let s = figure_one();
        let radio = RadioMap::new(&s).unwrap();
        let links: Vec<LinkId> = s.links.iter().map(|l| l.id).collect();
        let grouped = group_links(&radio, &links).unwrap();
        let required = links
            .iter()
            .map(|&l| (l, required_slots(radio.link(l), Demand::FullBuffer, &radio)))
            .collect();
        for mode in [SwitchMode::Flexible, SwitchMode::Fixed] {
            let plan = grouped.plan(&radio, &required, mode).unwrap();
            assert_eq!(check_plan(&grouped.cg, &plan, &radio), vec![]);
            let n = f64::from(plan.slots_per_frame);
            let sum: f64 = plan.link_rates().values().map(|r| r * n).sum();
            assert!((sum - plan.objective()).abs() <= 1e-9 * plan.objective());
        }
    }

    #[test]
    fn single_link_plan_uses_whole_frame() {
        let s = figure_one();
        let radio = RadioMap::new(&s).unwrap();
        let grouped = group_links(&radio, &[LinkId(0)]).unwrap();
        let plan = grouped
            .plan(
                &radio,
                &[(LinkId(0), 1)].into_iter().collect(),
                SwitchMode::Flexible,
            )
            .unwrap();
        let single = radio.single_link_capacity(radio.link(LinkId(0)));
        assert!((plan.link_rate(LinkId(0)) - single).abs() <= 1e-9 * single);
    }

    #[test]
    fn violations_are_reported() {
        let s = figure_one();
        let radio = RadioMap::new(&s).unwrap();
        let links: Vec<LinkId> = s.links.iter().map(|l| l.id).collect();
        let grouped = group_links(&radio, &links).unwrap();
        let required = links.iter().map(|&l| (l, 1)).collect();
        let mut plan = grouped
            .plan(&radio, &required, SwitchMode::Flexible)
            .unwrap();
        plan.slots.per_group_slots[0] += 100;
        let first = plan.groups.groups[0][0];
        *plan.power.per_link_power.get_mut(&first).unwrap() = 5.0;
        let v = check_plan(&grouped.cg, &plan, &radio);
        assert!(v
            .iter()
            .any(|x| matches!(x, PlanViolation::SlotOverflow { .. })));
        assert!(v
            .iter()
            .any(|x| matches!(x, PlanViolation::PowerOverflow { .. })));

        let (a, b) = grouped.cg.edges()[0];
        let mut merged = plan.clone();
        merged.groups = SdmaGroups {
            groups: vec![vec![a, b]],
        };
        let v = check_plan(&grouped.cg, &merged, &radio);
        assert!(v.contains(&PlanViolation::NotPartition));
        assert!(v.contains(&PlanViolation::Conflict(a, b)));
    }
}
