use std::fs;
use std::process::{Command, Output};

use paramid_cli::report::AnalysisReport;
use paramid_core::{builtin_system, SystemSpec};

fn paramid(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_paramid")).args(args).output().unwrap()
}

fn report(text: &str) -> AnalysisReport {
    serde_json::from_str(text).unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn lists_every_builtin() {
    let out = paramid(&["list-systems"]);
    assert!(out.status.success());
    let text = stdout(&out);
    for name in ["no-zero", "simple-zero", "tall-rank-drop", "double-zero-tall", "endpoint-zero"] {
        assert!(text.lines().any(|l| l.starts_with(name)), "{name} missing from\n{text}");
    }
}

#[test]
fn theta_reports_the_observation_set() {
    let out = paramid(&["theta", "--system", "simple-zero"]);
    assert!(out.status.success());
    let obs = report(&stdout(&out)).observation_set.unwrap();
    assert_eq!(obs.orders(), vec![0, 1, 0]);
    assert!((obs.times()[1] - 0.5).abs() <= 1e-6);
}

#[test]
fn malformed_expression_exits_with_input_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(
        &cfg,
        r#"{"schema_version": 1,
            "system": {"name": "bad", "n": 1, "l": 1, "T": 1.0, "x0": [0.0], "rhs": ["t * * p0"], "p0": ["0"]}}"#,
    )
    .unwrap();
    let out = paramid(&["theta", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("column"));
}

#[test]
fn unknown_system_is_an_input_error() {
    assert_eq!(paramid(&["theta", "--system", "nope"]).status.code(), Some(2));
}

#[test]
fn fourth_order_gram_zero_is_an_analysis_error() {
    // det ℬ = (t − 0.5)⁴ for double-zero: not a class-H system.
    let out = paramid(&["theta", "--system", "double-zero", "--mode", "h"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn csv_path_output() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("mu.csv");
    let out = paramid(&["mininorm-path", "--system", "tall-rank-drop", "--format", "csv", "--grid", "101", "--out", file.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    let text = fs::read_to_string(&file).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,det,mu"));
    assert_eq!(lines.count(), 101);
}

#[test]
fn distinguish_at_reduced_points() {
    let out = paramid(&["distinguish", "--system", "simple-zero", "--param", "0.1", "--at", "1"]);
    assert!(out.status.success());
    let v = report(&stdout(&out)).distinguish.unwrap();
    assert!(!v.distinguished && v.separation <= 1e-8);

    let out = paramid(&["distinguish", "--system", "simple-zero", "--param", "0.1"]);
    let v = report(&stdout(&out)).distinguish.unwrap();
    assert!(v.distinguished && (v.separation - 0.0125).abs() <= 1e-6);
}

#[test]
fn inline_system_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("inline.json");
    fs::write(
        &cfg,
        r#"{"schema_version": 1,
            "system": {"name": "shifted", "n": 1, "l": 1, "T": 2.0, "x0": [0.0], "rhs": ["(t - 1) * p0"], "p0": ["0"], "mode": "k"},
            "grid": 401}"#,
    )
    .unwrap();
    let out = paramid(&["theta", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rep = report(&stdout(&out));
    assert_eq!(rep.observation_set.unwrap().orders(), vec![0, 1, 0]);
    let echoed: SystemSpec = serde_json::from_value(serde_json::to_value(&rep.system).unwrap()).unwrap();
    assert_eq!(echoed, rep.system);
    assert_eq!(echoed.horizon, 2.0);
}

#[test]
fn builtin_spec_is_echoed_verbatim() {
    let out = paramid(&["theta", "--system", "tall-mixed"]);
    assert_eq!(report(&stdout(&out)).system, builtin_system("tall-mixed").unwrap());
}

#[test]
fn sweep_with_custom_directions() {
    let out = paramid(&["sweep", "--system", "simple-zero", "--direction", "cos(t)", "--eps", "0.01,0.001", "--format", "csv"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.starts_with("direction,epsilon,certified,distinguished,separation,counterexample"));
    assert_eq!(text.lines().count(), 3);
}
