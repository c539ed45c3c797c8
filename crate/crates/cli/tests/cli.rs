//! End-to-end checks of the `multical` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_multical"))
}

fn manifest(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join(rel)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

#[test]
fn bundled_config_meets_its_target() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let config = manifest("configs/mc_small.json");
    let o = run(&["run", "--config", path(&config), "--seed", "7", "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert!(summary["audited_loss"].as_f64().unwrap() <= 0.2);
    assert_eq!(summary["seed"], 7);
    assert!(out.join("transcript.jsonl").exists());
    let csv = std::fs::read_to_string(out.join("result.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.starts_with("config,problem,dynamics,seed,rounds"));
}

#[test]
fn best_response_config_meets_its_target() {
    let dir = tempfile::tempdir().unwrap();
    let config = manifest("configs/mc_small_nrbr.json");
    let o = run(&["run", "--config", path(&config), "--seed", "3", "--out", path(dir.path())]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn unknown_dynamics_is_a_config_error_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(manifest("configs/mc_small.json"))
        .unwrap()
        .replace("\"nrnr\"", "\"gradient\"")
        .replace("../../core/data/mc_small.json", path(&manifest("../core/data/mc_small.json")));
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, text).unwrap();
    let o = run(&["run", "--config", path(&bad), "--out", path(&dir.path().join("o"))]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("field `dynamics`"), "{err}");
    assert!(err.contains(":5:"), "{err}");
}

#[test]
fn same_config_and_seed_write_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let config = manifest("configs/mc_small.json");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = run(&["run", "--config", path(&config), "--seed", "11", "--rounds", "500", "--out", path(out)]);
        assert_eq!(o.status.code(), Some(0));
    }
    for file in ["summary.json", "transcript.jsonl", "result.csv"] {
        assert_eq!(std::fs::read(a.join(file)).unwrap(), std::fs::read(b.join(file)).unwrap(), "{file}");
    }
}

#[test]
fn auditing_the_bayes_predictor_reports_zero() {
    let o = run(&[
        "audit",
        "--predictor",
        path(&manifest("../core/data/mc_small_bayes.json")),
        "--distribution",
        path(&manifest("../core/data/mc_small.json")),
        "--problem",
        "mc",
        "--lambda",
        "0.25",
        "--tolerance",
        "0",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["audited_loss"].as_f64(), Some(0.0));
}

#[test]
fn sweep_medians_decrease_with_the_horizon() {
    let dir = tempfile::tempdir().unwrap();
    let config = manifest("configs/mc_small.json");
    let o = run(&[
        "sweep",
        "--config",
        path(&config),
        "--seeds",
        "0..8",
        "--rounds",
        "250,1000,4000",
        "--parallel",
        "2",
        "--out",
        path(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let mut reader = csv::Reader::from_path(dir.path().join("sweep.csv")).unwrap();
    let headers = reader.headers().unwrap().clone();
    let median_col = headers.iter().position(|h| h == "median").unwrap();
    let medians: Vec<f64> = reader.records().map(|r| r.unwrap()[median_col].parse().unwrap()).collect();
    assert_eq!(medians.len(), 3);
    assert!(medians[0] > medians[1] && medians[1] > medians[2], "{medians:?}");
    let runs = std::fs::read_to_string(dir.path().join("runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 1 + 3 * 8);
}

#[test]
fn selftest_passes() {
    let o = run(&["selftest"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    assert!(!String::from_utf8_lossy(&o.stdout).contains("FAIL"));
}

#[test]
fn invalid_arguments_exit_with_the_error_code() {
    let o = run(&["sweep", "--config", "x.json", "--rounds", "10", "--seeds", "5..2", "--out", "o"]);
    assert_eq!(o.status.code(), Some(2));
}
