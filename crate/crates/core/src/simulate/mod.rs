//! Scenario generation, the frame and latency engines, and multi-snapshot runs.

pub mod frame;
pub mod latency;
pub mod scenario;

use std::collections::BTreeMap;
use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::RadioMap;
use crate::error::{Error, Result};
use crate::graphs::build_link_graph_with;
use crate::model::{Demand, NetworkScenario, NodeId, Role, Route, SystemParams};
use crate::plan::SwitchMode;
use crate::routing::dynamic_routing;

pub use frame::{run_frame, BaselineState, FlowRate, FrameEngine, FrameMetrics, Scheme};
pub use latency::{packet_latency, DemandTrace, LatencyReport};
pub use scenario::{
    apply_duplex, figure_one, generate_manhattan, generate_platoon, DuplexPreset, ManhattanConfig,
    PlatoonConfig,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScenarioSpec {
    Manhattan(ManhattanConfig),
    Platoon(PlatoonConfig),
    /// A fixed scenario file; every snapshot reuses it.
    File {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RoutingMode {
    /// The scenario's own routes.
    #[default]
    Fixed,
    /// Routes chosen UE by UE on pipeline-estimated link rates.
    Dynamic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Traffic {
    FullBuffer,
    /// Uniform random bits per flow and frame, queued across `frames` frames.
    Finite {
        mean_bits: f64,
        frames: usize,
        #[serde(default = "half")]
        downlink_fraction: f64,
        #[serde(default = "default_drain")]
        drain_frames: usize,
    },
}

fn half() -> f64 {
    0.5
}

fn default_drain() -> usize {
    200
}

/// Everything needed to reproduce a multi-snapshot run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub scenario: ScenarioSpec,
    pub schemes: Vec<Scheme>,
    pub duplex: DuplexPreset,
    pub routing: RoutingMode,
    pub switch_point: SwitchMode,
    pub traffic: Traffic,
    pub snapshots: usize,
    pub seed: u64,
    pub params: SystemParams,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioSpec::Manhattan(ManhattanConfig::default()),
            schemes: vec![Scheme::Jsra, Scheme::Tdma],
            duplex: DuplexPreset::Half,
            routing: RoutingMode::Fixed,
            switch_point: SwitchMode::Flexible,
            traffic: Traffic::FullBuffer,
            snapshots: 1000,
            seed: 1,
            params: SystemParams::default(),
        }
    }
}

pub const METRIC_AVG_RATE: &str = "avg_rate_bps";
pub const METRIC_EDGE_RATE: &str = "edge_rate_bps";
pub const METRIC_LATENCY: &str = "mean_latency_frames";
pub const METRIC_THROUGHPUT: &str = "throughput_bps";
pub const METRIC_OBJECTIVE: &str = "objective";
pub const METRIC_GROUPS: &str = "groups";
pub const METRIC_SWITCH_POINT: &str = "switch_point";
pub const METRIC_UNROUTED: &str = "unrouted_flows";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotResult {
    pub snapshot: usize,
    pub seed: u64,
    pub scheme: Scheme,
    pub metrics: BTreeMap<String, f64>,
    /// Per-frame switch point of every node (finite traffic only).
    #[serde(skip)]
    pub switch_trace: Vec<BTreeMap<NodeId, f64>>,
}

impl SnapshotResult {
    pub fn metric(&self, name: &str) -> f64 {
        self.metrics.get(name).copied().unwrap_or(f64::NAN)
    }
}

/// Per-scheme aggregate over all snapshots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub scheme: Scheme,
    pub label: String,
    pub snapshots: usize,
    pub edge_rate: f64,
    pub avg_rate: f64,
    pub mean_latency: Option<f64>,
    /// Mean of every recorded metric.
    pub means: BTreeMap<String, f64>,
}

/// `q`-quantile with linear interpolation between order statistics.
pub fn percentile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Seed of snapshot `i` derived from the run seed.
pub fn snapshot_seed(seed: u64, i: usize) -> u64 {
    let mut x = seed ^ (i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Builds the snapshot scenario with duplex modes applied and routes chosen.
pub fn snapshot_scenario(cfg: &SimConfig, seed: u64) -> Result<(NetworkScenario, usize)> {
    let mut s = match &cfg.scenario {
        ScenarioSpec::Manhattan(m) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            generate_manhattan(m, &cfg.params, &mut rng)?
        }
        ScenarioSpec::Platoon(p) => generate_platoon(p, &cfg.params, seed)?,
        ScenarioSpec::File { path } => {
            let text = std::fs::read_to_string(path)?;
            NetworkScenario::from_toml(&text)?
        }
    };
    if !matches!(cfg.scenario, ScenarioSpec::Platoon(_)) {
        apply_duplex(&mut s, cfg.duplex);
    }
    let mut unrouted = 0;
    if cfg.routing == RoutingMode::Dynamic {
        let radio = RadioMap::new(&s)?;
        let lg = build_link_graph_with(&s, &radio)?;
        let ues: Vec<NodeId> = s.ues().map(|n| n.id).collect();
        let outcome = dynamic_routing(&s, &radio, &lg, &ues)?;
        unrouted = outcome.unrouted.len();
        s.routes = outcome.routes(|_, _| Demand::FullBuffer);
    }
    Ok((s, unrouted))
}

fn flow_rate_stats(rates: &[f64]) -> (f64, f64) {
    (mean(rates), percentile(rates, 0.05))
}

/// Runs every scheme on one snapshot.
pub fn run_snapshot(cfg: &SimConfig, index: usize) -> Result<Vec<SnapshotResult>> {
    let seed = snapshot_seed(cfg.seed, index);
    let (s, unrouted) = snapshot_scenario(cfg, seed)?;
    let routes: Vec<Route> = s.routes.clone();
    let engine = FrameEngine::new(&s, &routes, cfg.switch_point)?;
    let mut out = Vec::new();
    for &scheme in &cfg.schemes {
        let mut metrics = BTreeMap::new();
        let mut switch_trace = Vec::new();
        match &cfg.traffic {
            Traffic::FullBuffer => {
                let m = engine.run_frame(scheme, None, &mut BaselineState::default())?;
                let rates: Vec<f64> = m.flow_rates.iter().map(|f| f.rate).collect();
                let (avg, edge) = flow_rate_stats(&rates);
                metrics.insert(METRIC_AVG_RATE.into(), avg);
                metrics.insert(METRIC_EDGE_RATE.into(), edge);
                metrics.insert(METRIC_THROUGHPUT.into(), rates.iter().sum());
                metrics.insert(METRIC_OBJECTIVE.into(), m.objective);
                metrics.insert(METRIC_GROUPS.into(), m.group_count as f64);
                metrics.insert(
                    METRIC_SWITCH_POINT.into(),
                    infrastructure_mean(&s, &m.per_node_switch_point),
                );
            }
            Traffic::Finite {
                mean_bits,
                frames,
                downlink_fraction,
                drain_frames,
            } => {
                let directions: Vec<_> = engine.flows().iter().map(|f| f.direction).collect();
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
                let trace = DemandTrace::uniform(
                    &directions,
                    *frames,
                    *mean_bits,
                    *downlink_fraction,
                    &mut rng,
                );
                let r = packet_latency(&engine, scheme, &trace, *drain_frames)?;
                let (avg, edge) = flow_rate_stats(&r.per_flow_throughput);
                metrics.insert(METRIC_AVG_RATE.into(), avg);
                metrics.insert(METRIC_EDGE_RATE.into(), edge);
                metrics.insert(METRIC_THROUGHPUT.into(), r.throughput);
                metrics.insert(METRIC_LATENCY.into(), r.mean_latency());
                let sp: Vec<f64> = r
                    .switch_points
                    .iter()
                    .filter(|m| !m.is_empty())
                    .map(|m| infrastructure_mean(&s, m))
                    .collect();
                metrics.insert(METRIC_SWITCH_POINT.into(), mean(&sp));
                switch_trace = r.switch_points;
            }
        }
        metrics.insert(METRIC_UNROUTED.into(), unrouted as f64);
        out.push(SnapshotResult {
            snapshot: index,
            seed,
            scheme,
            metrics,
            switch_trace,
        });
    }
    Ok(out)
}

/// Mean switch point over BS/AP nodes that carried traffic.
fn infrastructure_mean(s: &NetworkScenario, sp: &BTreeMap<NodeId, f64>) -> f64 {
    let v: Vec<f64> = sp
        .iter()
        .filter(|(n, _)| {
            s.node(**n)
                .is_some_and(|n| matches!(n.role, Role::Bs | Role::Ap))
        })
        .map(|(_, &x)| x)
        .collect();
    mean(&v)
}

/// Runs all snapshots in parallel; results are ordered by snapshot then scheme.
pub fn run_snapshots(cfg: &SimConfig) -> Result<Vec<SnapshotResult>> {
    if cfg.schemes.is_empty() {
        return Err(Error::Config("schemes must not be empty".into()));
    }
    if cfg.snapshots == 0 {
        return Err(Error::Config("snapshots must be at least 1".into()));
    }
    let per: Vec<Vec<SnapshotResult>> = (0..cfg.snapshots)
        .into_par_iter()
        .map(|i| run_snapshot(cfg, i))
        .collect::<Result<_>>()?;
    Ok(per.into_iter().flatten().collect())
}

pub fn summarize(cfg: &SimConfig, results: &[SnapshotResult]) -> Vec<RunSummary> {
    cfg.schemes
        .iter()
        .map(|&scheme| {
            let mine: Vec<&SnapshotResult> =
                results.iter().filter(|r| r.scheme == scheme).collect();
            let mut means = BTreeMap::new();
            if let Some(first) = mine.first() {
                for name in first.metrics.keys() {
                    let v: Vec<f64> = mine.iter().map(|r| r.metric(name)).collect();
                    means.insert(name.clone(), mean(&v));
                }
            }
            RunSummary {
                scheme,
                label: scheme.label().to_string(),
                snapshots: mine.len(),
                edge_rate: means.get(METRIC_EDGE_RATE).copied().unwrap_or(0.0),
                avg_rate: means.get(METRIC_AVG_RATE).copied().unwrap_or(0.0),
                mean_latency: means.get(METRIC_LATENCY).copied(),
                means,
            }
        })
        .collect()
}

/// Runs the configured snapshots and aggregates them per scheme.
pub fn run_simulation(cfg: &SimConfig) -> Result<(Vec<SnapshotResult>, Vec<RunSummary>)> {
    let results = run_snapshots(cfg)?;
    let summary = summarize(cfg, &results);
    Ok((results, summary))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_interpolates() {
        let v: Vec<f64> = (0..=100).map(f64::from).collect();
        assert_eq!(percentile(&v, 0.05), 5.0);
        assert_eq!(percentile(&[1.0, 2.0], 0.5), 1.5);
        assert_eq!(percentile(&[3.0], 0.05), 3.0);
    }

    #[test]
    fn small_run_is_deterministic() {
        let cfg = SimConfig {
            scenario: ScenarioSpec::Manhattan(ManhattanConfig {
                ue_count: 8,
                ..Default::default()
            }),
            snapshots: 2,
            seed: 11,
            ..Default::default()
        };
        let (a, sa) = run_simulation(&cfg).unwrap();
        let (b, sb) = run_simulation(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(sa, sb);
        assert_eq!(a.len(), 4);
        for s in &sa {
            assert!(s.edge_rate <= s.avg_rate);
        }
    }

    #[test]
    fn finite_traffic_reports_latency() {
        let cfg = SimConfig {
            scenario: ScenarioSpec::Platoon(PlatoonConfig {
                n_vehicles: 4,
                ..Default::default()
            }),
            schemes: Scheme::ALL.to_vec(),
            traffic: Traffic::Finite {
                mean_bits: 2e5,
                frames: 10,
                downlink_fraction: 0.5,
                drain_frames: 50,
            },
            snapshots: 1,
            ..Default::default()
        };
        let (_, summary) = run_simulation(&cfg).unwrap();
        for s in summary {
            assert!(s.mean_latency.unwrap() >= 1.0);
        }
    }
}
