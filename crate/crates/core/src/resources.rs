//! Slot allocation across groups and water-filling power allocation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::channel::RadioMap;
use crate::error::{Error, Result};
use crate::model::{Demand, Link, LinkId, NodeId};
use crate::scheduling::SdmaGroups;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotAllocation {
    pub per_group_slots: Vec<u32>,
    pub required_per_link: BTreeMap<LinkId, u32>,
}

impl SlotAllocation {
    pub fn total(&self) -> u32 {
        self.per_group_slots.iter().sum()
    }
}

/// Slots a link needs per frame when it transmits alone at full power.
pub fn required_slots(link: &Link, demand: Demand, radio: &RadioMap) -> u32 {
    let n = radio.params().slots_per_frame;
    match demand {
        Demand::FullBuffer => 1,
        Demand::Bits(bits) => {
            let capacity = radio.single_link_capacity(link);
            slots_for_bits(bits, capacity, radio.params().slot_duration(), n)
        }
    }
}

/// `ceil(bits / (capacity * slot))` capped at `n`; zero capacity needs all `n`.
pub fn slots_for_bits(bits: f64, capacity: f64, slot_duration: f64, n: u32) -> u32 {
    if bits <= 0.0 {
        return 0;
    }
    let per_slot = capacity * slot_duration;
    if !(per_slot > 0.0) {
        return n;
    }
    let ratio = bits / per_slot;
    // Absorb rounding noise so an exact multiple does not tip into the next slot.
    let slots = (ratio - ratio * 1e-12).ceil();
    if slots >= f64::from(n) {
        n
    } else {
        slots as u32
    }
}

fn group_maxima(groups: &SdmaGroups, required: &BTreeMap<LinkId, u32>) -> Result<Vec<u64>> {
    groups
        .groups
        .iter()
        .map(|g| {
            g.iter()
                .map(|l| {
                    required
                        .get(l)
                        .map(|&r| u64::from(r))
                        .ok_or_else(|| Error::Domain(format!("no required slot count for {l}")))
                })
                .try_fold(0u64, |acc, r| r.map(|r| acc.max(r)))
        })
        .collect()
}

fn proportional(maxima: &[u64], budget: u32) -> Vec<u32> {
    let total: u64 = maxima.iter().sum();
    if total == 0 {
        return vec![0; maxima.len()];
    }
    maxima
        .iter()
        .map(|&m| (m * u64::from(budget) / total) as u32)
        .collect()
}

/// Splits `n` slots across groups in proportion to each group's largest need.
pub fn allocate_slots(
    groups: &SdmaGroups,
    required: &BTreeMap<LinkId, u32>,
    n: u32,
) -> Result<SlotAllocation> {
    if groups.is_empty() {
        return Err(Error::Empty("group list"));
    }
    let maxima = group_maxima(groups, required)?;
    Ok(SlotAllocation {
        per_group_slots: proportional(&maxima, n),
        required_per_link: required.clone(),
    })
}

/// Fixed 50% switch point: `floor(n/2)` slots shared by downlink groups, the
/// rest by uplink groups, each share split proportionally as usual.
pub fn allocate_slots_fixed_split(
    groups: &SdmaGroups,
    required: &BTreeMap<LinkId, u32>,
    downlink_group: &[bool],
    n: u32,
) -> Result<SlotAllocation> {
    if groups.is_empty() {
        return Err(Error::Empty("group list"));
    }
    if downlink_group.len() != groups.len() {
        return Err(Error::Domain("direction flags do not match groups".into()));
    }
    let maxima = group_maxima(groups, required)?;
    let dl_budget = n / 2;
    let pick = |dl: bool| -> Vec<u64> {
        maxima
            .iter()
            .zip(downlink_group)
            .map(|(&m, &d)| if d == dl { m } else { 0 })
            .collect()
    };
    let dl = proportional(&pick(true), dl_budget);
    let ul = proportional(&pick(false), n - dl_budget);
    Ok(SlotAllocation {
        per_group_slots: dl.iter().zip(&ul).map(|(a, b)| a + b).collect(),
        required_per_link: required.clone(),
    })
}

/// Interference-free channel quality `g / (l * noise)` in 1/W.
pub fn channel_quality(link: &Link, radio: &RadioMap) -> f64 {
    radio.boresight_gain(link) / (link.pathloss_linear * radio.params().noise_power)
}

/// Per-link transmit powers of one sender inside one group.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PowerAllocation {
    pub per_link_power: BTreeMap<LinkId, f64>,
    /// Water level `1/phi` keyed by (sender, group index).
    pub water_level: BTreeMap<(NodeId, usize), f64>,
}

/// Water-filling result for one sender; powers follow the input order.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSlice {
    pub powers: Vec<f64>,
    pub water_level: f64,
}

/// Closed-form water-filling over the given channel qualities.
pub fn allocate_power(gammas: &[f64], p_max: f64) -> Result<PowerSlice> {
    if gammas.is_empty() {
        return Err(Error::Empty("sender link list"));
    }
    if !(p_max > 0.0) {
        return Err(Error::Domain(format!(
            "power budget must be positive, got {p_max}"
        )));
    }
    if let Some(g) = gammas.iter().find(|g| !(**g > 0.0 && g.is_finite())) {
        return Err(Error::Domain(format!(
            "channel quality must be positive, got {g}"
        )));
    }
    let mut order: Vec<usize> = (0..gammas.len()).collect();
    order.sort_by(|&a, &b| gammas[b].total_cmp(&gammas[a]).then(a.cmp(&b)));
    let inv: Vec<f64> = order.iter().map(|&i| 1.0 / gammas[i]).collect();

    let mut level = p_max + inv[0];
    let mut prefix = 0.0;
    for m in 1..=inv.len() {
        prefix += inv[m - 1];
        let candidate = (p_max + prefix) / m as f64;
        let above = candidate > inv[m - 1];
        let below_next = m == inv.len() || candidate <= inv[m];
        if above && below_next {
            level = candidate;
        }
    }
    let mut powers = vec![0.0; gammas.len()];
    for (&i, &inv_g) in order.iter().zip(&inv) {
        powers[i] = (level - inv_g).max(0.0);
    }
    Ok(PowerSlice {
        powers,
        water_level: level,
    })
}

/// Largest violation of the optimality conditions of a water-filling slice.
pub fn kkt_residual(slice: &PowerSlice, gammas: &[f64], p_max: f64) -> f64 {
    let phi = 1.0 / slice.water_level;
    let total: f64 = slice.powers.iter().sum();
    let mut worst = (total - p_max).abs();
    for (&p, &g) in slice.powers.iter().zip(gammas) {
        worst = worst.max((-p).max(0.0));
        let marginal = g / (1.0 + g * p);
        let omega = phi - marginal;
        if p > 0.0 {
            worst = worst.max((marginal - phi).abs());
        }
        worst = worst.max((omega * p).abs());
        worst = worst.max((-omega).max(0.0));
    }
    worst
}
