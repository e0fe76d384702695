use std::path::Path;
use std::process::{Command, Output};

use dpmrf::{IsingModel, Model};

fn dpmrf(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dpmrf")).args(args).current_dir(dir).output().unwrap()
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let model: Model = IsingModel::matched_pairs(4, 0.7).unwrap().into();
    std::fs::write(dir.path().join("model.json"), model.to_json()).unwrap();
    let out = dpmrf(dir.path(), &["sample", "--model", "model.json", "--n", "3000", "--seed", "1", "--out", "data.csv"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    dir
}

#[test]
fn sample_writes_spins() {
    let dir = setup();
    let text = std::fs::read_to_string(dir.path().join("data.csv")).unwrap();
    assert_eq!(text.lines().count(), 3000);
    assert!(text.lines().all(|l| l.split(',').all(|v| v == "1" || v == "-1") && l.split(',').count() == 4));
}

#[test]
fn ledger_sums_to_budget() {
    let dir = setup();
    let out = dpmrf(
        dir.path(),
        &["learn-ising", "--data", "data.csv", "--lambda", "1", "--rho", "0.8", "--ledger", "ledger.csv", "--out", "est.json"],
    );
    assert!(out.status.success());
    let ledger = std::fs::read_to_string(dir.path().join("ledger.csv")).unwrap();
    let total: f64 = ledger.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap()).sum();
    assert!((total - 0.8).abs() < 1e-12);
    let est = Model::from_json(&std::fs::read_to_string(dir.path().join("est.json")).unwrap()).unwrap();
    assert_eq!(est.dim(), 4);
}

#[test]
fn non_private_runs_leave_an_empty_ledger() {
    let dir = setup();
    let out = dpmrf(
        dir.path(),
        &["learn-mrf", "--data", "data.csv", "--t", "2", "--lambda", "1", "--non-private", "--ledger", "ledger.csv"],
    );
    assert!(out.status.success());
    assert_eq!(std::fs::read_to_string(dir.path().join("ledger.csv")).unwrap(), "label,rho\n");
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["meta"]["non_private"], true);
}

#[test]
fn structure_output_is_a_graph() {
    let dir = setup();
    let out = dpmrf(dir.path(), &["learn-structure", "--data", "data.csv", "--lambda", "1", "--eta", "0.7", "--non-private"]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), r#"{"p":4,"released":true,"edges":[[0,1],[2,3]]}"#);
}

#[test]
fn state_cap_from_environment() {
    let dir = setup();
    let out = Command::new(env!("CARGO_BIN_EXE_dpmrf"))
        .args(["release-parities", "--data", "data.csv", "--t", "2"])
        .current_dir(dir.path())
        .env("DPMRF_STATE_CAP", "8")
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("exceeds the cap of 8"));
}

#[test]
fn conversions() {
    let dir = tempfile::tempdir().unwrap();
    let out = dpmrf(dir.path(), &["accountant", "--convert", "pure-to-zcdp", "--eps", "1"]);
    assert_eq!(String::from_utf8_lossy(&out.stdout), "rho=0.5\n");
    let out = dpmrf(dir.path(), &["accountant", "--convert", "zcdp-to-approx", "--rho", "0.5"]);
    assert!(!out.status.success());
}

#[test]
fn bad_inputs_fail_cleanly() {
    let dir = setup();
    let out = dpmrf(dir.path(), &["learn-ising", "--data", "missing.csv", "--lambda", "1"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
    let out = dpmrf(dir.path(), &["learn-ising", "--data", "data.csv", "--lambda", "-1"]);
    assert!(!out.status.success());
}

#[test]
fn experiment_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let spec = r#"{"name":"tiny","model":{"fixture":"matched_pairs","p":4,"eta":0.6},"task":"parameters",
        "learner":"ising","privacy":{"kind":"none"},"grid":[200,800],"trials":2,"alpha":0.3}"#;
    std::fs::write(dir.path().join("spec.json"), spec).unwrap();
    let out = dpmrf(dir.path(), &["experiment", "--spec", "spec.json", "--out", "r.csv", "--emit-plot-data", "plots"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let trials = std::fs::read_to_string(dir.path().join("r.csv")).unwrap();
    assert_eq!(trials.lines().count(), 5);
    assert!(trials.starts_with("n,trial,seed,status,"));
    let plot = std::fs::read_to_string(dir.path().join("plots/tiny.csv")).unwrap();
    assert!(plot.starts_with("n,success_rate\n200,"));
    assert!(String::from_utf8_lossy(&out.stdout).contains("wall_time"));
}
