use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const MINIMAL: &str = r#"
schemes = ["jsra", "tdma"]
snapshots = 2
seed = 7

[scenario]
kind = "manhattan"
ue_count = 8
"#;

fn iabsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_iabsim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn data_rows(csv: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(csv).unwrap();
    r.records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect()
}

#[test]
fn run_writes_one_block_per_snapshot_and_scheme() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "min.toml", MINIMAL);
    let out = dir.path().join("out");
    let o = iabsim(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let rows = data_rows(&out.join("results.csv"));
    let mut blocks: Vec<(String, String)> =
        rows.iter().map(|r| (r[2].clone(), r[3].clone())).collect();
    blocks.dedup();
    assert_eq!(blocks.len(), 2 * 2);
    assert!(rows.iter().all(|r| r[1] == "7" && r[0].len() == 16));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["seed"], 7);
    assert_eq!(summary["summary"].as_array().unwrap().len(), 2);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("edge_rate") && stdout.contains("jsra"));
}

#[test]
fn same_config_and_seed_give_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "min.toml", MINIMAL);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(
        iabsim(&["run", &cfg, "--out", a.to_str().unwrap(), "--threads", "2"])
            .status
            .code(),
        Some(0)
    );
    assert_eq!(
        iabsim(&["run", &cfg, "--out", b.to_str().unwrap()])
            .status
            .code(),
        Some(0)
    );
    for f in ["results.csv", "summary.json"] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn seed_and_snapshot_flags_override_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "min.toml", MINIMAL);
    let out = dir.path().join("out");
    let o = iabsim(&[
        "run",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "9",
        "--snapshots",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let rows = data_rows(&out.join("results.csv"));
    assert!(rows.iter().all(|r| r[1] == "9" && r[2] == "0"));
}

#[test]
fn missing_schemes_exits_2_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.toml", "snapshots = 2\n");
    for cmd in ["run", "validate-config"] {
        let o = iabsim(&[cmd, &cfg]);
        assert_eq!(o.status.code(), Some(2));
        assert!(String::from_utf8_lossy(&o.stderr).contains("schemes"));
    }
}

#[test]
fn invalid_values_report_their_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bad.toml",
        "schemes = [\"jsra\"]\n\nduplex = \"quarter\"\n",
    );
    let o = iabsim(&["validate-config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(
        String::from_utf8_lossy(&o.stderr).contains("line 3"),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
}

#[test]
fn sweep_runs_one_block_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "min.toml", MINIMAL);
    let out = dir.path().join("out");
    let o = iabsim(&[
        "sweep",
        &cfg,
        "--axis",
        "ue_count",
        "--values",
        "4,6,8",
        "--snapshots",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let rows = data_rows(&out.join("results.csv"));
    let mut values: Vec<&str> = rows.iter().map(|r| r[3].as_str()).collect();
    values.dedup();
    assert_eq!(values, ["4", "6", "8"]);
    assert!(rows.iter().all(|r| r[2] == "ue_count"));
    let hashes: std::collections::BTreeSet<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(hashes.len(), 3);
}

#[test]
fn sweep_rejects_unknown_axis_and_empty_values() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "min.toml", MINIMAL);
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    assert_eq!(
        iabsim(&["sweep", &cfg, "--axis", "hops", "--values", "1", "--out", out])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        iabsim(&["sweep", &cfg, "--axis", "ue_count", "--values", "", "--out", out])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(iabsim(&["launch"]).status.code(), Some(2));
    assert_eq!(
        iabsim(&["run", "/nonexistent/config.toml"]).status.code(),
        Some(2)
    );
    assert_eq!(
        iabsim(&["verify", "--criteria", "99"]).status.code(),
        Some(2)
    );
}

#[test]
fn verify_passes_clean_and_names_the_kkt_criterion_under_fault() {
    let o = iabsim(&["verify", "--criteria", "2,11"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("PASS [ 2] water-filling optimality"));

    let o = iabsim(&["verify", "--criteria", "2", "--inject-fault", "waterfill"]);
    assert_eq!(o.status.code(), Some(1));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(
        stdout.contains("FAIL [ 2] water-filling optimality") && stdout.contains("KKT"),
        "{stdout}"
    );
    assert!(String::from_utf8_lossy(&o.stderr).contains("water-filling optimality"));
}
