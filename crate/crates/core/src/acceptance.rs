//! The acceptance suite: property, oracle and trend checks with one report
//! per criterion.

use std::collections::BTreeMap;
use std::fmt;
use std::time::{Duration, Instant};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::{los_probability, pathloss, RadioMap};
use crate::error::Result;
use crate::graphs::{ConflictGraph, LinkGraph};
use crate::model::{LinkId, NodeId, SystemParams};
use crate::oracle::{brute_force_jsra, waterfill_bisection, widest_path_oracle, OracleBudget};
use crate::plan::{check_plan, group_links, SwitchMode};
use crate::resources::{allocate_power, kkt_residual, PowerSlice};
use crate::routing::select_path;
use crate::scheduling::cg_mis_schedule_traced;
use crate::simulate::{
    generate_manhattan, mean, run_snapshots, snapshot_seed, DuplexPreset, FrameEngine,
    ManhattanConfig, PlatoonConfig, RoutingMode, ScenarioSpec, Scheme, SimConfig, SnapshotResult,
    Traffic, METRIC_AVG_RATE, METRIC_EDGE_RATE, METRIC_LATENCY, METRIC_SWITCH_POINT,
    METRIC_THROUGHPUT,
};

/// Outcome of one criterion.
#[derive(Debug, Clone, PartialEq)]
pub struct CriterionReport {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CriterionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(
            f,
            "{verdict} [{:>2}] {}: {}",
            self.id, self.name, self.detail
        )
    }
}

/// Deliberate defects for checking that the suite catches them.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Faults {
    /// Shift power between links after water-filling.
    pub waterfill: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteSettings {
    pub seed: u64,
    pub random_graphs: usize,
    pub waterfill_instances: usize,
    pub snapshots: usize,
    pub micro_instances: usize,
    pub path_graphs: usize,
    pub platoon_seeds: usize,
    pub faults: Faults,
}

impl Default for SuiteSettings {
    fn default() -> Self {
        Self {
            seed: 20190,
            random_graphs: 500,
            waterfill_instances: 1000,
            snapshots: 200,
            micro_instances: 300,
            path_graphs: 500,
            platoon_seeds: 50,
            faults: Faults::default(),
        }
    }
}

pub const CRITERIA: [(u8, &str); 11] = [
    (1, "greedy independent set bound"),
    (2, "water-filling optimality"),
    (3, "schedule feasibility"),
    (4, "oracle dominance"),
    (5, "ordering against TDMA"),
    (6, "dynamic routing gain"),
    (7, "widest path agreement"),
    (8, "switch point flexibility"),
    (9, "duplex ordering"),
    (10, "platoon trends"),
    (11, "channel model"),
];

/// Mean bits per flow and frame for the finite-traffic Manhattan checks.
pub const MANHATTAN_MEAN_BITS: f64 = 5e5;
/// Mean bits per vehicle flow and frame for the platoon checks.
pub const PLATOON_MEAN_BITS: f64 = 5e5;
/// Vehicle transmit power in watts for the platoon checks.
pub const PLATOON_VEHICLE_POWER_W: f64 = 1.0;

/// Criteria that the implemented algorithms do not meet at the stated
/// tolerances. They are still run and reported as FAIL.
pub const KNOWN_LIMITATIONS: &[u8] = &[5, 6, 8, 10];

fn report(id: u8, passed: bool, detail: String) -> CriterionReport {
    let name = CRITERIA[usize::from(id) - 1].1;
    CriterionReport {
        id,
        name,
        passed,
        detail,
    }
}

fn failed(id: u8, e: crate::error::Error) -> CriterionReport {
    report(id, false, format!("error: {e}"))
}

fn secs(d: Duration) -> String {
    format!("{:.2} s", d.as_secs_f64())
}

/// Runs one criterion by number.
pub fn run_criterion(id: u8, st: &SuiteSettings) -> CriterionReport {
    let outcome = match id {
        1 => Ok(greedy_bound(st)),
        2 => Ok(waterfilling(st)),
        3 => schedule_feasibility(st),
        4 => oracle_dominance(st),
        5 => tdma_ordering(st),
        6 => routing_gain(st),
        7 => Ok(widest_path(st)),
        8 => switch_points(st),
        9 => duplex_ordering(st),
        10 => platoon_trends(st),
        11 => channel_model(),
        _ => return report(1, false, format!("no criterion {id}")),
    };
    outcome.unwrap_or_else(|e| failed(id, e))
}

/// Runs every criterion in order.
pub fn run_all(st: &SuiteSettings) -> Vec<CriterionReport> {
    CRITERIA
        .iter()
        .map(|&(id, _)| run_criterion(id, st))
        .collect()
}

fn random_graph(rng: &mut ChaCha8Rng, n: usize, p: f64) -> ConflictGraph {
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.random_bool(p) {
                edges.push((a, b));
            }
        }
    }
    ConflictGraph::from_edges(n, &edges)
}

fn greedy_bound(st: &SuiteSettings) -> CriterionReport {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(st.seed ^ 1);
    let probs = [0.1, 0.3, 0.6];
    let (mut first_bad, mut later_bad, mut steps) = (0, 0, 0);
    for i in 0..st.random_graphs {
        let n = rng.random_range(1..=50);
        let cg = random_graph(&mut rng, n, probs[i % probs.len()]);
        let (_, trace) = cg_mis_schedule_traced(&cg);
        for (k, step) in trace.iter().enumerate() {
            steps += 1;
            if step.group_size * (step.residual_max_degree + 1) < step.residual_vertices {
                if k == 0 {
                    first_bad += 1;
                } else {
                    later_bad += 1;
                }
            }
        }
    }
    let elapsed = start.elapsed();
    let passed = first_bad == 0 && later_bad == 0 && elapsed < Duration::from_secs(10);
    report(
        1,
        passed,
        format!(
            "{} graphs, {steps} extractions, {first_bad} first-group and {later_bad} residual violations, {}",
            st.random_graphs,
            secs(elapsed)
        ),
    )
}

fn faulty(mut slice: PowerSlice) -> PowerSlice {
    let n = slice.powers.len();
    let moved = 0.1 * slice.powers[0];
    slice.powers[0] -= moved;
    slice.powers[n - 1] += moved;
    slice
}

fn waterfilling(st: &SuiteSettings) -> CriterionReport {
    let mut rng = ChaCha8Rng::seed_from_u64(st.seed ^ 2);
    let (mut kkt_bad, mut agree_bad) = (0, 0);
    let (mut worst_kkt, mut worst_rel) = (0.0f64, 0.0f64);
    for _ in 0..st.waterfill_instances {
        let n = rng.random_range(2..=16);
        let gammas: Vec<f64> = (0..n)
            .map(|_| 10f64.powf(rng.random_range(-2.0..4.0)))
            .collect();
        let p_max = 10f64.powf(rng.random_range(-1.0..1.0));
        let Ok(mut slice) = allocate_power(&gammas, p_max) else {
            kkt_bad += 1;
            continue;
        };
        if st.faults.waterfill {
            slice = faulty(slice);
        }
        let r = kkt_residual(&slice, &gammas, p_max);
        worst_kkt = worst_kkt.max(r);
        if !(r <= 1e-9) {
            kkt_bad += 1;
        }
        let reference = waterfill_bisection(&gammas, p_max).expect("valid instance");
        for (a, b) in slice.powers.iter().zip(&reference) {
            let scale = a.abs().max(b.abs());
            let diff = (a - b).abs();
            if scale > 0.0 {
                worst_rel = worst_rel.max(diff / scale);
            }
            if diff > 1e-6 * scale + 1e-12 * p_max {
                agree_bad += 1;
            }
        }
    }
    report(
        2,
        kkt_bad == 0 && agree_bad == 0,
        format!(
            "{} instances, {kkt_bad} KKT violations (worst {worst_kkt:.1e}), {agree_bad} link mismatches against bisection (worst relative {worst_rel:.1e})",
            st.waterfill_instances
        ),
    )
}

fn manhattan(ue_count: u32) -> ManhattanConfig {
    ManhattanConfig {
        ue_count,
        ..Default::default()
    }
}

fn schedule_feasibility(st: &SuiteSettings) -> Result<CriterionReport> {
    let params = SystemParams {
        slots_per_frame: 20,
        ..Default::default()
    };
    let counts: Vec<(usize, usize)> = (0..st.snapshots)
        .into_par_iter()
        .map(|i| -> Result<(usize, usize)> {
            let seed = snapshot_seed(st.seed ^ 3, i);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = generate_manhattan(&manhattan(20), &params, &mut rng)?;
            let mut checked = 0;
            let mut bad = 0;
            for mode in [SwitchMode::Flexible, SwitchMode::Fixed] {
                let engine = FrameEngine::new(&s, &s.routes, mode)?;
                let bits: Vec<f64> = engine
                    .flows()
                    .iter()
                    .map(|_| rng.random_range(0.0..4e6))
                    .collect();
                let link_bits = engine.link_bits(&bits);
                for required in [engine.required(None), engine.required(Some(&link_bits))] {
                    let plan = engine.jsra_plan(&required)?;
                    checked += 1;
                    if !check_plan(&engine.grouped().cg, &plan, engine.radio()).is_empty() {
                        bad += 1;
                    }
                }
            }
            Ok((checked, bad))
        })
        .collect::<Result<_>>()?;
    let checked: usize = counts.iter().map(|c| c.0).sum();
    let bad: usize = counts.iter().map(|c| c.1).sum();
    Ok(report(
        3,
        bad == 0,
        format!(
            "{checked} plans over {} snapshots with N = 20, {bad} infeasible",
            st.snapshots
        ),
    ))
}

fn oracle_dominance(st: &SuiteSettings) -> Result<CriterionReport> {
    let start = Instant::now();
    let budget = OracleBudget::default();
    let outcomes: Vec<(f64, f64, bool)> = (0..st.micro_instances)
        .into_par_iter()
        .map(|i| -> Result<(f64, f64, bool)> {
            let mut rng = ChaCha8Rng::seed_from_u64(snapshot_seed(st.seed ^ 4, i));
            let n_slots = rng.random_range(1..=8u32);
            let params = SystemParams {
                slots_per_frame: n_slots,
                ..Default::default()
            };
            let cfg = ManhattanConfig {
                ap_count: 3,
                ue_count: 4,
                ..Default::default()
            };
            let s = generate_manhattan(&cfg, &params, &mut rng)?;
            let radio = RadioMap::new(&s)?;
            let k = rng.random_range(1..=6usize.min(s.links.len()));
            let mut links: Vec<LinkId> = sample(&mut rng, s.links.len(), k)
                .into_iter()
                .map(|j| s.links[j].id)
                .collect();
            links.sort_unstable();
            let grouped = group_links(&radio, &links)?;
            let required: BTreeMap<LinkId, u32> = links.iter().map(|&l| (l, 1)).collect();
            let heuristic = grouped
                .plan(&radio, &required, SwitchMode::Flexible)?
                .objective();
            let optimal = brute_force_jsra(&radio, &links, &grouped.cg, n_slots, &budget)?;
            let dominated = heuristic <= optimal * (1.0 + 1e-9);
            let ratio = if optimal > 0.0 {
                heuristic / optimal
            } else {
                1.0
            };
            let context = (2.0 * grouped.cg.average_degree() + 3.0) / 5.0;
            Ok((ratio, context, dominated))
        })
        .collect::<Result<_>>()?;
    let elapsed = start.elapsed();
    let ratios: Vec<f64> = outcomes.iter().map(|o| o.0).collect();
    let contexts: Vec<f64> = outcomes.iter().map(|o| o.1).collect();
    let breaches = outcomes.iter().filter(|o| !o.2).count();
    let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let passed = breaches == 0 && elapsed < Duration::from_secs(300);
    Ok(report(
        4,
        passed,
        format!(
            "{} instances, {breaches} above the oracle, heuristic/optimal mean {:.3} min {:.3}, mean (2d+3)/5 {:.3}, {}",
            st.micro_instances,
            mean(&ratios),
            min,
            mean(&contexts),
            secs(elapsed)
        ),
    ))
}

fn by_snapshot(results: &[SnapshotResult], scheme: Scheme) -> Vec<&SnapshotResult> {
    let mut v: Vec<&SnapshotResult> = results.iter().filter(|r| r.scheme == scheme).collect();
    v.sort_by_key(|r| r.snapshot);
    v
}

fn at_least(a: f64, b: f64) -> bool {
    a >= b * (1.0 - 1e-9)
}

fn full_buffer_config(st: &SuiteSettings, salt: u64) -> SimConfig {
    SimConfig {
        scenario: ScenarioSpec::Manhattan(manhattan(20)),
        schemes: vec![Scheme::Jsra],
        snapshots: st.snapshots,
        seed: st.seed ^ salt,
        ..Default::default()
    }
}

fn tdma_ordering(st: &SuiteSettings) -> Result<CriterionReport> {
    let cfg = SimConfig {
        schemes: vec![Scheme::Jsra, Scheme::Tdma],
        ..full_buffer_config(st, 5)
    };
    let results = run_snapshots(&cfg)?;
    let jsra = by_snapshot(&results, Scheme::Jsra);
    let tdma = by_snapshot(&results, Scheme::Tdma);
    let n = jsra.len() as f64;
    let avg = jsra
        .iter()
        .zip(&tdma)
        .filter(|(j, t)| at_least(j.metric(METRIC_AVG_RATE), t.metric(METRIC_AVG_RATE)))
        .count() as f64
        / n;
    let edge = jsra
        .iter()
        .zip(&tdma)
        .filter(|(j, t)| at_least(j.metric(METRIC_EDGE_RATE), t.metric(METRIC_EDGE_RATE)))
        .count() as f64
        / n;
    Ok(report(
        5,
        avg >= 0.95 && edge >= 0.90,
        format!(
            "average rate at least TDMA in {:.1}% of snapshots, edge rate in {:.1}%",
            100.0 * avg,
            100.0 * edge
        ),
    ))
}

fn routing_gain(st: &SuiteSettings) -> Result<CriterionReport> {
    let fixed_cfg = full_buffer_config(st, 6);
    let dynamic_cfg = SimConfig {
        routing: RoutingMode::Dynamic,
        ..fixed_cfg.clone()
    };
    let fixed = run_snapshots(&fixed_cfg)?;
    let dynamic = run_snapshots(&dynamic_cfg)?;
    let pairs: Vec<(f64, f64)> = by_snapshot(&dynamic, Scheme::Jsra)
        .iter()
        .zip(by_snapshot(&fixed, Scheme::Jsra))
        .map(|(d, f)| (d.metric(METRIC_AVG_RATE), f.metric(METRIC_AVG_RATE)))
        .collect();
    let wins = pairs.iter().filter(|(d, f)| at_least(*d, *f)).count() as f64 / pairs.len() as f64;
    let gain = mean(&pairs.iter().map(|(d, _)| *d).collect::<Vec<_>>())
        / mean(&pairs.iter().map(|(_, f)| *f).collect::<Vec<_>>());
    Ok(report(
        6,
        wins >= 0.90,
        format!(
            "dynamic routes at least closest-AP routes in {:.1}% of snapshots, mean gain {:.3}x",
            100.0 * wins,
            gain
        ),
    ))
}

fn layered_dag(rng: &mut ChaCha8Rng) -> (LinkGraph, NodeId, NodeId) {
    let n = rng.random_range(2..=10u32);
    let layers = if n == 2 {
        2
    } else {
        rng.random_range(3..=n.min(5))
    };
    // Source alone in layer 0, destination alone in the last layer.
    let mut layer_of = vec![0u32; n as usize];
    layer_of[n as usize - 1] = layers - 1;
    for l in layer_of.iter_mut().take(n as usize - 1).skip(1) {
        *l = rng.random_range(1..layers - 1);
    }
    let mut edges = Vec::new();
    for a in 0..n {
        for b in 0..n {
            if layer_of[b as usize] == layer_of[a as usize] + 1 && rng.random_bool(0.6) {
                edges.push((a, b, f64::from(rng.random_range(1..100u32))));
            }
        }
    }
    (
        LinkGraph::from_weighted_edges((0..n).map(NodeId), &edges),
        NodeId(0),
        NodeId(n - 1),
    )
}

fn random_digraph(rng: &mut ChaCha8Rng, acyclic: bool) -> (LinkGraph, NodeId, NodeId) {
    let n = rng.random_range(2..=10u32);
    let p = rng.random_range(0.2..0.6);
    let mut edges = Vec::new();
    for a in 0..n {
        for b in 0..n {
            if a != b && (!acyclic || a < b) && rng.random_bool(p) {
                edges.push((a, b, f64::from(rng.random_range(1..100u32))));
            }
        }
    }
    (
        LinkGraph::from_weighted_edges((0..n).map(NodeId), &edges),
        NodeId(0),
        NodeId(n - 1),
    )
}

fn agrees(
    lg: &LinkGraph,
    s: NodeId,
    d: NodeId,
    budget: &OracleBudget,
) -> (bool, Option<f64>, Option<f64>) {
    let got = select_path(lg, s, d).map(|p| p.weight);
    let want = widest_path_oracle(lg, s, d, budget).expect("within budget");
    (got == want, got, want)
}

fn widest_path(st: &SuiteSettings) -> CriterionReport {
    let budget = OracleBudget::default();
    let mut rng = ChaCha8Rng::seed_from_u64(st.seed ^ 7);
    let half = st.path_graphs / 2;
    let mut layered_bad = Vec::new();
    for i in 0..half {
        let (lg, s, d) = layered_dag(&mut rng);
        let (ok, got, want) = agrees(&lg, s, d, &budget);
        if !ok {
            layered_bad.push(format!("#{i} {got:?} vs {want:?}"));
        }
    }
    let mut general = [(0usize, 0usize); 2];
    let mut witness: Option<String> = None;
    for i in 0..st.path_graphs - half {
        let acyclic = i % 2 == 0;
        let (lg, s, d) = random_digraph(&mut rng, acyclic);
        let (ok, got, want) = agrees(&lg, s, d, &budget);
        let slot = &mut general[usize::from(!acyclic)];
        slot.0 += 1;
        if ok {
            slot.1 += 1;
        } else if witness.is_none() {
            let edges: Vec<String> = lg
                .edges()
                .iter()
                .map(|e| format!("{}>{}:{}", e.tx.0, e.rx.0, e.weight))
                .collect();
            witness = Some(format!(
                "found {got:?}, best {want:?} on [{}]",
                edges.join(" ")
            ));
        }
    }
    let mut detail = format!(
        "layered DAGs {}/{half} agree; general DAGs {}/{}; cyclic graphs {}/{}",
        half - layered_bad.len(),
        general[0].1,
        general[0].0,
        general[1].1,
        general[1].0
    );
    if let Some(w) = witness {
        detail.push_str(&format!("; first gap {w}"));
    }
    if !layered_bad.is_empty() {
        detail.push_str(&format!("; layered gaps {}", layered_bad.join(", ")));
    }
    report(7, layered_bad.is_empty(), detail)
}

fn finite(downlink_fraction: f64, mean_bits: f64) -> Traffic {
    Traffic::Finite {
        mean_bits,
        frames: 100,
        downlink_fraction,
        drain_frames: 200,
    }
}

fn switch_points(st: &SuiteSettings) -> Result<CriterionReport> {
    let base = SimConfig {
        scenario: ScenarioSpec::Manhattan(manhattan(20)),
        schemes: vec![Scheme::Jsra],
        snapshots: (st.snapshots / 10).max(1),
        seed: st.seed ^ 8,
        ..Default::default()
    };

    let dl_cfg = SimConfig {
        traffic: finite(1.0, MANHATTAN_MEAN_BITS),
        ..base.clone()
    };
    let dl = run_snapshots(&dl_cfg)?;
    let (mut frames, mut off) = (0usize, 0usize);
    for r in &dl {
        for frame in &r.switch_trace {
            frames += 1;
            if frame.values().any(|&x| x != 1.0) {
                off += 1;
            }
        }
    }

    let sym_cfg = SimConfig {
        traffic: finite(0.5, MANHATTAN_MEAN_BITS),
        ..base.clone()
    };
    let sym = run_snapshots(&sym_cfg)?;
    let sym_mean = mean(
        &sym.iter()
            .map(|r| r.metric(METRIC_SWITCH_POINT))
            .collect::<Vec<_>>(),
    );
    let mut per_node: BTreeMap<(usize, NodeId), Vec<f64>> = BTreeMap::new();
    for r in &sym {
        for frame in &r.switch_trace {
            for (&n, &x) in frame {
                per_node.entry((r.snapshot, n)).or_default().push(x);
            }
        }
    }
    let node_means: Vec<f64> = per_node.values().map(|v| mean(v)).collect();
    let in_band = node_means
        .iter()
        .filter(|&&x| (0.35..=0.65).contains(&x))
        .count();

    let flex_cfg = SimConfig {
        snapshots: st.snapshots,
        traffic: finite(0.8, MANHATTAN_MEAN_BITS),
        ..base
    };
    let fixed_cfg = SimConfig {
        switch_point: SwitchMode::Fixed,
        ..flex_cfg.clone()
    };
    let flex = run_snapshots(&flex_cfg)?;
    let fixed = run_snapshots(&fixed_cfg)?;
    let wins = by_snapshot(&flex, Scheme::Jsra)
        .iter()
        .zip(by_snapshot(&fixed, Scheme::Jsra))
        .filter(|(a, b)| at_least(a.metric(METRIC_AVG_RATE), b.metric(METRIC_AVG_RATE)))
        .count() as f64
        / st.snapshots as f64;

    let passed = off == 0 && frames > 0 && (0.35..=0.65).contains(&sym_mean) && wins >= 0.90;
    Ok(report(
        8,
        passed,
        format!(
            "all-downlink frames off 1.0: {off}/{frames}; symmetric mean {sym_mean:.3} ({in_band}/{} nodes in band); flexible at least fixed split in {:.1}%",
            node_means.len(),
            100.0 * wins
        ),
    ))
}

fn duplex_ordering(st: &SuiteSettings) -> Result<CriterionReport> {
    let order = [
        DuplexPreset::Half,
        DuplexPreset::FullResidualAp,
        DuplexPreset::FullResidualApBs,
        DuplexPreset::FullPerfectApBs,
    ];
    let mut means = Vec::new();
    for preset in order {
        let cfg = SimConfig {
            duplex: preset,
            ..full_buffer_config(st, 9)
        };
        let results = run_snapshots(&cfg)?;
        means.push(mean(
            &results
                .iter()
                .map(|r| r.metric(METRIC_AVG_RATE))
                .collect::<Vec<_>>(),
        ));
    }
    let passed = means.windows(2).all(|w| at_least(w[1], w[0]));
    let listed: Vec<String> = order
        .iter()
        .zip(&means)
        .map(|(p, m)| format!("{} {:.4e}", p.label(), m))
        .collect();
    Ok(report(
        9,
        passed,
        format!("mean average rate {}", listed.join(" <= ")),
    ))
}

fn platoon_trends(st: &SuiteSettings) -> Result<CriterionReport> {
    let schemes = [Scheme::Jsra, Scheme::RoundRobin, Scheme::PropFair];
    let mut latency: BTreeMap<Scheme, Vec<f64>> = BTreeMap::new();
    let mut throughput: Vec<f64> = Vec::new();
    for bt in 0..=10 {
        let cfg = SimConfig {
            scenario: ScenarioSpec::Platoon(PlatoonConfig {
                n_vehicles: 10,
                bt_enabled_count: bt,
                ..Default::default()
            }),
            schemes: schemes.to_vec(),
            traffic: finite(0.5, PLATOON_MEAN_BITS),
            snapshots: st.platoon_seeds,
            seed: st.seed ^ 10,
            params: SystemParams {
                p_max_ue: PLATOON_VEHICLE_POWER_W,
                ..Default::default()
            },
            ..Default::default()
        };
        let results = run_snapshots(&cfg)?;
        for scheme in schemes {
            let mine = by_snapshot(&results, scheme);
            latency.entry(scheme).or_default().push(mean(
                &mine
                    .iter()
                    .map(|r| r.metric(METRIC_LATENCY))
                    .collect::<Vec<_>>(),
            ));
            if scheme == Scheme::Jsra {
                throughput.push(mean(
                    &mine
                        .iter()
                        .map(|r| r.metric(METRIC_THROUGHPUT))
                        .collect::<Vec<_>>(),
                ));
            }
        }
    }
    let jsra = &latency[&Scheme::Jsra];
    let latency_down = jsra.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9));
    let throughput_up = throughput.windows(2).all(|w| at_least(w[1], w[0]));
    let beats = |s: Scheme| {
        jsra.iter()
            .zip(&latency[&s])
            .all(|(a, b)| *a <= b * (1.0 + 1e-9))
    };
    let (rr, pf) = (beats(Scheme::RoundRobin), beats(Scheme::PropFair));
    let fmt = |v: &[f64]| {
        v.iter()
            .map(|x| format!("{x:.4}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    Ok(report(
        10,
        latency_down && throughput_up && rr && pf,
        format!(
            "latency by bt [{}] non-increasing {latency_down}; throughput non-decreasing {throughput_up}; below round robin {rr} [{}], below proportional fair {pf} [{}]",
            fmt(jsra),
            fmt(&latency[&Scheme::RoundRobin]),
            fmt(&latency[&Scheme::PropFair])
        ),
    ))
}

fn channel_model() -> Result<CriterionReport> {
    let p = SystemParams::default();
    let mut notes = Vec::new();
    let near_ok = (1..=200)
        .map(|i| f64::from(i) * 0.1)
        .try_fold(true, |ok, d| {
            Ok::<_, crate::error::Error>(ok && los_probability(d, &p)? == 1.0)
        })?;
    if !near_ok {
        notes.push("line-of-sight probability below 1 within 20 m".to_string());
    }
    let at39 = los_probability(39.0, &p)?;
    let mid_ok = (at39 - 0.6921).abs() <= 1e-3;
    let mut monotone = true;
    for los in [true, false] {
        let mut last = 0.0;
        for i in 1..=2000 {
            let l = pathloss(f64::from(i) * 0.5, los, 0.0, &p)?;
            monotone &= l > last;
            last = l;
        }
    }
    if !monotone {
        notes.push("pathloss not increasing in distance".to_string());
    }
    let mut detail = format!(
        "P(LOS, 39 m) = {at39:.4}; within 20 m exactly 1: {near_ok}; pathloss monotone: {monotone}"
    );
    for n in notes {
        detail.push_str(&format!("; {n}"));
    }
    Ok(report(11, near_ok && mid_ok && monotone, detail))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SuiteSettings {
        SuiteSettings {
            random_graphs: 30,
            waterfill_instances: 50,
            snapshots: 4,
            micro_instances: 6,
            path_graphs: 40,
            platoon_seeds: 2,
            ..Default::default()
        }
    }

    #[test]
    fn exact_criteria_pass_at_small_scale() {
        let st = small();
        for id in [1, 2, 3, 4, 7, 11] {
            let r = run_criterion(id, &st);
            assert!(r.passed, "{r}");
        }
    }

    #[test]
    fn waterfill_fault_fails_the_kkt_criterion() {
        let st = SuiteSettings {
            faults: Faults { waterfill: true },
            ..small()
        };
        let r = run_criterion(2, &st);
        assert!(!r.passed);
        assert!(r.to_string().starts_with("FAIL [ 2] water-filling"));
    }

    #[test]
    fn layered_generator_is_layered() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let (lg, s, d) = layered_dag(&mut rng);
            assert!(lg.out_edges(d).next().is_none());
            assert!(lg.edges().iter().all(|e| e.rx != s));
        }
    }
}
