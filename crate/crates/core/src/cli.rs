//! Command-line front end: configuration files, experiment runs, sweeps and
//! the acceptance suite.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::acceptance::{run_criterion, Faults, SuiteSettings, CRITERIA, KNOWN_LIMITATIONS};
use crate::model::SystemParams;
use crate::plan::SwitchMode;
use crate::simulate::{
    run_simulation, DuplexPreset, ManhattanConfig, RoutingMode, RunSummary, ScenarioSpec, Scheme,
    SimConfig, SnapshotResult, Traffic,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

pub const RESULTS_CSV: &str = "results.csv";
pub const SUMMARY_JSON: &str = "summary.json";

/// A failed command and the exit status it maps to.
#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or configuration.
    Usage(String),
    /// Acceptance criteria failed.
    Failed(String),
    /// Anything else going wrong while running.
    Run(crate::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Failed(_) | CliError::Run(_) => EXIT_FAILURE,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "error: {m}"),
            CliError::Failed(m) => write!(f, "{m}"),
            CliError::Run(e) => write!(f, "error: {e}"),
        }
    }
}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        CliError::Run(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Run(e.into())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Run(e.into())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Run(e.into())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Experiment description read from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_scenario")]
    pub scenario: ScenarioSpec,
    pub schemes: Vec<Scheme>,
    #[serde(default)]
    pub duplex: DuplexPreset,
    #[serde(default)]
    pub routing: RoutingMode,
    #[serde(default)]
    pub switch_point: SwitchMode,
    #[serde(default = "default_traffic")]
    pub traffic: Traffic,
    #[serde(default = "default_snapshots")]
    pub snapshots: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub params: SystemParams,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Where result files go.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Output directory; `--out` overrides it. Defaults to `results`.
    pub dir: Option<PathBuf>,
}

fn default_scenario() -> ScenarioSpec {
    ScenarioSpec::Manhattan(ManhattanConfig::default())
}

fn default_traffic() -> Traffic {
    Traffic::FullBuffer
}

fn default_snapshots() -> usize {
    100
}

fn default_seed() -> u64 {
    1
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        let cfg: Self =
            toml::from_str(text).map_err(|e| CliError::Usage(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative scenario file paths resolve against its directory.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| {
            CliError::Usage(format!(
                "{}: {}",
                path.display(),
                e.to_string().trim_start_matches("error: ")
            ))
        })?;
        if let ScenarioSpec::File { path: p } = &mut cfg.scenario {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.schemes.is_empty() {
            return Err(CliError::Usage(
                "invalid config: `schemes` must list at least one scheme".into(),
            ));
        }
        if self.snapshots == 0 {
            return Err(CliError::Usage(
                "invalid config: `snapshots` must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            scenario: self.scenario.clone(),
            schemes: self.schemes.clone(),
            duplex: self.duplex,
            routing: self.routing,
            switch_point: self.switch_point,
            traffic: self.traffic.clone(),
            snapshots: self.snapshots,
            seed: self.seed,
            params: self.params.clone(),
        }
    }
}

/// First 16 hex digits of the SHA-256 of the config's canonical JSON.
pub fn config_hash(cfg: &SimConfig) -> String {
    let json = serde_json::to_vec(cfg).expect("config serializes");
    hex::encode(&Sha256::digest(&json)[..8])
}

#[derive(Debug, Parser)]
#[command(
    name = "iabsim",
    version,
    about = "Simulate scheduling, resource allocation and routing in mmWave IAB networks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the snapshots described by a config file.
    Run {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run a config once per value of one parameter.
    Sweep {
        config: PathBuf,
        /// One of ue_count, bt_enabled_count, duplex, switch-point.
        #[arg(long)]
        axis: String,
        /// Comma-separated values.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
        #[command(flatten)]
        common: Common,
    },
    /// Run the acceptance suite.
    Verify {
        /// Comma-separated criterion numbers; all when omitted.
        #[arg(long)]
        criteria: Option<String>,
        /// Fail on every FAIL line, including known limitations.
        #[arg(long)]
        strict: bool,
        #[arg(long, hide = true)]
        inject_fault: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Check a config file and print its hash.
    ValidateConfig { config: PathBuf },
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub snapshots: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub threads: Option<usize>,
}

impl Common {
    fn apply(&self, cfg: &mut ExperimentConfig) -> CliResult<()> {
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(n) = self.snapshots {
            cfg.snapshots = n;
        }
        cfg.validate()
    }

    fn out_dir(&self, cfg: &ExperimentConfig) -> PathBuf {
        self.out
            .clone()
            .or_else(|| cfg.output.dir.clone())
            .unwrap_or_else(|| PathBuf::from("results"))
    }
}

fn set_threads(threads: Option<usize>) -> CliResult<()> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        // A pool that already exists (repeated in-process calls) is kept.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    Ok(())
}

/// Parses arguments, runs the command and returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: Command) -> CliResult<()> {
    match command {
        Command::Run { config, common } => {
            set_threads(common.threads)?;
            let mut cfg = ExperimentConfig::load(&config)?;
            common.apply(&mut cfg)?;
            run(&cfg, &common.out_dir(&cfg))
        }
        Command::Sweep {
            config,
            axis,
            values,
            common,
        } => {
            set_threads(common.threads)?;
            let mut cfg = ExperimentConfig::load(&config)?;
            common.apply(&mut cfg)?;
            let axis: Axis = axis.parse()?;
            let points = axis.points(&cfg, &values)?;
            sweep(axis, &points, &common.out_dir(&cfg))
        }
        Command::Verify {
            criteria,
            strict,
            inject_fault,
            seed,
            threads,
        } => {
            set_threads(threads)?;
            let ids = parse_criteria(criteria.as_deref())?;
            let mut settings = SuiteSettings::default();
            if let Some(seed) = seed {
                settings.seed = seed;
            }
            match inject_fault.as_deref() {
                None => {}
                Some("waterfill") => settings.faults = Faults { waterfill: true },
                Some(other) => return Err(CliError::Usage(format!("unknown fault `{other}`"))),
            }
            verify(&ids, &settings, strict)
        }
        Command::ValidateConfig { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            println!("ok {} {}", config.display(), config_hash(&cfg.sim_config()));
            Ok(())
        }
    }
}

fn parse_criteria(list: Option<&str>) -> CliResult<Vec<u8>> {
    let Some(list) = list else {
        return Ok(CRITERIA.iter().map(|c| c.0).collect());
    };
    let ids: Vec<u8> = list
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<u8>()
                .ok()
                .filter(|id| CRITERIA.iter().any(|c| c.0 == *id))
                .ok_or_else(|| CliError::Usage(format!("no criterion `{}`", s.trim())))
        })
        .collect::<CliResult<_>>()?;
    if ids.is_empty() {
        return Err(CliError::Usage("--criteria lists no criteria".into()));
    }
    Ok(ids)
}

/// Runs criteria, prints one line each and fails on any failure outside
/// `KNOWN_LIMITATIONS` (or on any failure at all when `strict`).
pub fn verify(ids: &[u8], settings: &SuiteSettings, strict: bool) -> CliResult<()> {
    let mut blocking = Vec::new();
    for &id in ids {
        let start = Instant::now();
        let report = run_criterion(id, settings);
        println!("{report} ({:.1} s)", start.elapsed().as_secs_f64());
        if !report.passed && (strict || !KNOWN_LIMITATIONS.contains(&id)) {
            blocking.push(format!("[{id}] {}", report.name));
        }
    }
    if blocking.is_empty() {
        println!("verify: ok");
        Ok(())
    } else {
        Err(CliError::Failed(format!(
            "verify: failed {}",
            blocking.join(", ")
        )))
    }
}

/// Runs one experiment and writes `results.csv` and `summary.json` into `out`.
pub fn run(cfg: &ExperimentConfig, out: &Path) -> CliResult<()> {
    let sim = cfg.sim_config();
    let hash = config_hash(&sim);
    let (results, summary) = run_simulation(&sim)?;
    fs::create_dir_all(out)?;
    let mut w = csv::Writer::from_path(out.join(RESULTS_CSV))?;
    w.write_record([
        "config_hash",
        "seed",
        "snapshot",
        "scheme",
        "metric",
        "value",
    ])?;
    for r in &results {
        for row in metric_rows(r) {
            w.write_record([
                hash.as_str(),
                &sim.seed.to_string(),
                &row[0],
                &row[1],
                &row[2],
                &row[3],
            ])?;
        }
    }
    w.flush()?;
    let json = serde_json::json!({
        "config_hash": hash,
        "seed": sim.seed,
        "config": sim,
        "summary": summary,
    });
    write_json(&out.join(SUMMARY_JSON), &json)?;
    print_summary(&hash, sim.seed, &summary);
    Ok(())
}

fn metric_rows(r: &SnapshotResult) -> Vec<[String; 4]> {
    r.metrics
        .iter()
        .map(|(m, v)| {
            [
                r.snapshot.to_string(),
                r.scheme.label().to_string(),
                m.clone(),
                v.to_string(),
            ]
        })
        .collect()
}

fn write_json(path: &Path, value: &serde_json::Value) -> CliResult<()> {
    let mut f = fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    Ok(())
}

fn print_summary(hash: &str, seed: u64, summary: &[RunSummary]) {
    println!("config {hash} seed {seed}");
    println!(
        "{:<12} {:>14} {:>14} {:>10}",
        "scheme", "edge_rate", "avg_rate", "latency"
    );
    for s in summary {
        let latency = s
            .mean_latency
            .map_or_else(|| "-".to_string(), |l| format!("{l:.3}"));
        println!(
            "{:<12} {:>14.4e} {:>14.4e} {:>10}",
            s.label, s.edge_rate, s.avg_rate, latency
        );
    }
}

/// A parameter that `sweep` can vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    UeCount,
    BtEnabledCount,
    Duplex,
    SwitchPoint,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::UeCount => "ue_count",
            Axis::BtEnabledCount => "bt_enabled_count",
            Axis::Duplex => "duplex",
            Axis::SwitchPoint => "switch-point",
        }
    }

    /// One config per value, labelled by the value as given.
    pub fn points(
        self,
        base: &ExperimentConfig,
        values: &str,
    ) -> CliResult<Vec<(String, ExperimentConfig)>> {
        let values: Vec<&str> = values
            .split(',')
            .map(str::trim)
            .filter(|v| !v.is_empty())
            .collect();
        if values.is_empty() {
            return Err(CliError::Usage(format!(
                "no values given for axis `{}`",
                self.name()
            )));
        }
        values
            .into_iter()
            .map(|v| {
                let mut cfg = base.clone();
                self.apply(&mut cfg, v)?;
                Ok((v.to_string(), cfg))
            })
            .collect()
    }

    fn apply(self, cfg: &mut ExperimentConfig, value: &str) -> CliResult<()> {
        let bad = || {
            CliError::Usage(format!(
                "invalid value `{value}` for axis `{}`",
                self.name()
            ))
        };
        match self {
            Axis::UeCount => match &mut cfg.scenario {
                ScenarioSpec::Manhattan(m) => m.ue_count = value.parse().map_err(|_| bad())?,
                _ => {
                    return Err(CliError::Usage(
                        "axis `ue_count` needs a manhattan scenario".into(),
                    ))
                }
            },
            Axis::BtEnabledCount => match &mut cfg.scenario {
                ScenarioSpec::Platoon(p) => {
                    p.bt_enabled_count = value.parse().map_err(|_| bad())?
                }
                _ => {
                    return Err(CliError::Usage(
                        "axis `bt_enabled_count` needs a platoon scenario".into(),
                    ))
                }
            },
            Axis::Duplex => {
                cfg.duplex = DuplexPreset::ALL
                    .into_iter()
                    .find(|p| p.label() == value)
                    .ok_or_else(bad)?;
            }
            Axis::SwitchPoint => {
                cfg.switch_point = match value {
                    "flexible" => SwitchMode::Flexible,
                    "fixed" => SwitchMode::Fixed,
                    _ => return Err(bad()),
                };
            }
        }
        Ok(())
    }
}

impl std::str::FromStr for Axis {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "ue_count" => Ok(Axis::UeCount),
            "bt_enabled_count" => Ok(Axis::BtEnabledCount),
            "duplex" => Ok(Axis::Duplex),
            "switch-point" | "switch_point" => Ok(Axis::SwitchPoint),
            _ => Err(CliError::Usage(format!(
                "unknown axis `{s}` (expected ue_count, bt_enabled_count, duplex or switch-point)"
            ))),
        }
    }
}

/// Runs every sweep point and writes one combined long-format CSV.
pub fn sweep(axis: Axis, points: &[(String, ExperimentConfig)], out: &Path) -> CliResult<()> {
    fs::create_dir_all(out)?;
    let mut w = csv::Writer::from_path(out.join(RESULTS_CSV))?;
    w.write_record([
        "config_hash",
        "seed",
        "axis",
        "axis_value",
        "snapshot",
        "scheme",
        "metric",
        "value",
    ])?;
    let mut blocks = Vec::new();
    for (value, cfg) in points {
        let sim = cfg.sim_config();
        let hash = config_hash(&sim);
        let (results, summary) = run_simulation(&sim)?;
        for r in &results {
            for row in metric_rows(r) {
                w.write_record([
                    hash.as_str(),
                    &sim.seed.to_string(),
                    axis.name(),
                    value,
                    &row[0],
                    &row[1],
                    &row[2],
                    &row[3],
                ])?;
            }
        }
        println!("{} = {value}", axis.name());
        print_summary(&hash, sim.seed, &summary);
        blocks.push(serde_json::json!({
            "axis_value": value,
            "config_hash": hash,
            "seed": sim.seed,
            "config": sim,
            "summary": summary,
        }));
    }
    w.flush()?;
    write_json(
        &out.join(SUMMARY_JSON),
        &serde_json::json!({ "axis": axis.name(), "points": blocks }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
schemes = ["jsra", "tdma"]
snapshots = 2

[scenario]
kind = "manhattan"
ue_count = 10
"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(cfg.schemes, vec![Scheme::Jsra, Scheme::Tdma]);
        assert_eq!(cfg.duplex, DuplexPreset::Half);
        assert_eq!(cfg.traffic, Traffic::FullBuffer);
        assert_eq!(cfg.seed, 1);
    }

    #[test]
    fn missing_schemes_names_the_field() {
        let err = ExperimentConfig::from_toml("snapshots = 2\n").unwrap_err();
        assert_eq!(err.exit_code(), EXIT_USAGE);
        assert!(err.to_string().contains("schemes"), "{err}");
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err =
            ExperimentConfig::from_toml("schemes = [\"jsra\"]\nsnapshots = \"two\"\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn unknown_fields_and_empty_schemes_are_rejected() {
        assert!(ExperimentConfig::from_toml("schemes = [\"jsra\"]\nsnapshot = 2\n").is_err());
        assert!(ExperimentConfig::from_toml("schemes = []\n").is_err());
        assert!(ExperimentConfig::from_toml("schemes = [\"jsra\"]\nsnapshots = 0\n").is_err());
    }

    #[test]
    fn hash_tracks_config_content() {
        let a = ExperimentConfig::from_toml(MINIMAL).unwrap().sim_config();
        let mut b = a.clone();
        assert_eq!(config_hash(&a), config_hash(&b));
        b.seed += 1;
        assert_ne!(config_hash(&a), config_hash(&b));
        assert_eq!(config_hash(&a).len(), 16);
    }

    #[test]
    fn axes_parse_and_apply() {
        let base = ExperimentConfig::from_toml(MINIMAL).unwrap();
        let pts = Axis::UeCount.points(&base, "20,60,100").unwrap();
        assert_eq!(pts.len(), 3);
        assert!(matches!(&pts[2].1.scenario, ScenarioSpec::Manhattan(m) if m.ue_count == 100));
        let pts = Axis::Duplex
            .points(&base, "half,full-perfect-ap-bs")
            .unwrap();
        assert_eq!(pts[1].1.duplex, DuplexPreset::FullPerfectApBs);
        assert_eq!(
            Axis::SwitchPoint.points(&base, "fixed").unwrap()[0]
                .1
                .switch_point,
            SwitchMode::Fixed
        );
        assert_eq!(
            Axis::UeCount.points(&base, "").unwrap_err().exit_code(),
            EXIT_USAGE
        );
        assert_eq!(
            Axis::BtEnabledCount
                .points(&base, "1")
                .unwrap_err()
                .exit_code(),
            EXIT_USAGE
        );
        assert!("hops".parse::<Axis>().is_err());
    }

    #[test]
    fn criteria_lists_are_checked() {
        assert_eq!(parse_criteria(None).unwrap().len(), CRITERIA.len());
        assert_eq!(parse_criteria(Some("2, 11")).unwrap(), vec![2, 11]);
        assert!(parse_criteria(Some("12")).is_err());
        assert!(parse_criteria(Some("")).is_err());
    }
}
