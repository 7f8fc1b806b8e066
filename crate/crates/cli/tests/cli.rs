use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use aoi_core::analysis::aoi_sum;
use aoi_core::optimize::{branch_and_bound, build_fractional_program};
use aoi_core::sim::{simulate, SimConfig, SimResult};
use aoi_core::{PreemptionPolicy, SystemConfig};
use serde_json::Value;

const UNIT: &str = r#"{"sensors": 1, "processes": 1, "lambda": [1], "mu": 1,
    "correlation": [[1]], "preemption": [1]}"#;

const FIG3A_AT_ONE: &str = r#"{"sensors": 2, "processes": 2, "lambda": [1, 1], "mu": 2,
    "correlation": [[1, 0.5], [0.5, 1]], "preemption": [0.5, 0.5]}"#;

fn bench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aoi-bench"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn config_file(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn stdout_json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn fig3a_config() -> SystemConfig {
    SystemConfig::from_rows(vec![1.0, 1.0], 2.0, vec![vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap()
}

#[test]
fn analyze_unit_case() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_file(dir.path(), "unit.json", UNIT);
    let v = stdout_json(&bench(&["analyze", &cfg]));
    assert_eq!(v["total"].as_f64().unwrap(), 2.0);
    assert_eq!(v["per_process"][0].as_f64().unwrap(), 2.0);
}

#[test]
fn analyze_matches_library_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_file(dir.path(), "fig3a.json", FIG3A_AT_ONE);
    let v = stdout_json(&bench(&["analyze", &cfg]));
    let lib = aoi_sum(&fig3a_config(), &PreemptionPolicy::uniform(2, 0.5).unwrap()).unwrap();
    assert_eq!(v["total"].as_f64().unwrap().to_bits(), lib.total.to_bits());
    for (j, want) in lib.per_process.iter().enumerate() {
        assert_eq!(
            v["per_process"][j].as_f64().unwrap().to_bits(),
            want.to_bits()
        );
    }
}

#[test]
fn malformed_json_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_file(dir.path(), "bad.json", r#"{"sensors": 1, "lambda": [1"#);
    let out = bench(&["analyze", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));

    let unknown = config_file(
        dir.path(),
        "unknown.json",
        r#"{"sensors": 1, "processes": 1, "lambda": [1], "mu": 1, "correlation": [[1]], "nu": 3}"#,
    );
    assert_eq!(bench(&["analyze", &unknown]).status.code(), Some(2));
    assert_eq!(
        bench(&["analyze", "/nonexistent/config.json"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn invalid_config_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_file(
        dir.path(),
        "neg.json",
        r#"{"sensors": 1, "processes": 1, "lambda": [-1], "mu": 1, "correlation": [[1]]}"#,
    );
    assert_eq!(bench(&["analyze", &cfg]).status.code(), Some(2));
}

#[test]
fn uncovered_process_opt_in() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_file(
        dir.path(),
        "uncovered.json",
        r#"{"sensors": 1, "processes": 2, "lambda": [1], "mu": 1, "correlation": [[1, 0]]}"#,
    );
    assert_eq!(bench(&["analyze", &cfg]).status.code(), Some(2));
    let out = bench(&["analyze", "--allow-uncovered", &cfg]);
    assert!(out.status.success());
    // JSON has no infinity, so the sentinel is serialized as null
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["per_process"][0].as_f64().unwrap(), 2.0);
    assert!(v["per_process"][1].is_null());
}

#[test]
fn simulate_flags_override_document() {
    let dir = tempfile::tempdir().unwrap();
    let text = FIG3A_AT_ONE.replace(
        "\"preemption\"",
        "\"sim\": {\"horizon\": 1e6, \"seed\": 1, \"replications\": 9}, \"preemption\"",
    );
    let cfg = config_file(dir.path(), "sim.json", &text);
    let out = bench(&[
        "simulate",
        &cfg,
        "--horizon",
        "2000",
        "--seed",
        "5",
        "--reps",
        "3",
    ]);
    let got: SimResult = serde_json::from_slice(&stdout_json_bytes(&out)).unwrap();
    let lib = simulate(
        &fig3a_config(),
        &PreemptionPolicy::uniform(2, 0.5).unwrap(),
        &SimConfig::new(2000.0, 5, 3),
    )
    .unwrap();
    assert_eq!(got, lib);

    let again = bench(&[
        "simulate",
        &cfg,
        "--horizon",
        "2000",
        "--seed",
        "5",
        "--reps",
        "3",
    ]);
    assert_eq!(out.stdout, again.stdout);
}

fn stdout_json_bytes(out: &Output) -> Vec<u8> {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out.stdout.clone()
}

#[test]
fn simulate_csv_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_file(dir.path(), "fig3a.json", FIG3A_AT_ONE);
    let out = bench(&[
        "simulate",
        &cfg,
        "--horizon",
        "500",
        "--reps",
        "2",
        "--format",
        "csv",
    ]);
    let text = String::from_utf8(stdout_json_bytes(&out)).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("replication,process,aoi"));
    assert_eq!(lines.len(), 1 + 2 * 2);
}

#[test]
fn optimize_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_file(dir.path(), "fig3a.json", FIG3A_AT_ONE);
    let v = stdout_json(&bench(&["optimize", &cfg, "--epsilon", "0.01"]));
    let lib = branch_and_bound(&build_fractional_program(&fig3a_config()).unwrap(), 0.01).unwrap();
    assert_eq!(v["objective"].as_f64().unwrap(), lib.objective);
    assert_eq!(v["lower_bound"].as_f64().unwrap(), lib.lower_bound);
    assert!(v["certified"].as_bool().unwrap());
    assert_eq!(v["iterations"].as_u64().unwrap(), lib.iterations);
    assert_eq!(v["nodes"].as_u64().unwrap(), lib.nodes_explored);
    assert_eq!(v["theorem2_bound"].as_u64().unwrap(), 24);
    let keys: Vec<&String> = v.as_object().unwrap().keys().collect();
    for k in [
        "p_star",
        "objective",
        "lower_bound",
        "gap",
        "iterations",
        "nodes",
        "certified",
        "theorem2_bound",
    ] {
        assert!(keys.iter().any(|key| *key == k), "missing {k}");
    }
}

#[test]
fn bound_hand_value() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_file(
        dir.path(),
        "ones.json",
        r#"{"sensors": 2, "processes": 2, "lambda": [1, 1], "mu": 1, "correlation": [[1, 1], [1, 1]]}"#,
    );
    let v = stdout_json(&bench(&["bound", &cfg, "--epsilon", "0.1"]));
    assert_eq!(v["theorem2_bound"].as_u64().unwrap(), 20);
    assert_eq!(
        bench(&["bound", &cfg, "--epsilon", "2"]).status.code(),
        Some(2)
    );
}

#[test]
fn sweep_preset_to_file_with_gnuplot() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("fig6a.csv");
    let gp = dir.path().join("fig6a.gp");
    let out = bench(&[
        "sweep",
        "--preset",
        "fig6a",
        "--out",
        csv.to_str().unwrap(),
        "--gnuplot",
        gp.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert!(lines
        .next()
        .unwrap()
        .starts_with("value,p_1,p_2,p_star_1,p_star_2"));
    assert_eq!(lines.count(), 11);
    assert!(fs::read_to_string(&gp)
        .unwrap()
        .contains(csv.to_str().unwrap()));
}

#[test]
fn sweep_spec_file_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let spec = r#"{"parameter": "mu", "values": [1, 2],
        "base": {"sensors": 1, "processes": 1, "lambda": [1], "mu": 1, "correlation": [[1]]},
        "outputs": ["analysis"]}"#;
    let path = config_file(dir.path(), "spec.json", spec);
    let out = bench(&["sweep", "--spec", &path]);
    let text = String::from_utf8(stdout_json_bytes(&out)).unwrap();
    assert_eq!(text.lines().nth(1).unwrap().split(',').nth(2).unwrap(), "2");

    let bad = config_file(dir.path(), "bad.json", &spec.replace("[1, 2]", "[2, 1]"));
    assert_eq!(bench(&["sweep", "--spec", &bad]).status.code(), Some(2));
    assert_eq!(bench(&["sweep", "--preset", "fig9"]).status.code(), Some(2));
    assert_eq!(bench(&["sweep"]).status.code(), Some(2));
}

#[test]
fn jobs_flag_does_not_change_output() {
    let a = bench(&[
        "sweep",
        "--preset",
        "fig3b",
        "--horizon",
        "300",
        "--reps",
        "2",
        "--jobs",
        "1",
    ]);
    let b = bench(&[
        "sweep",
        "--preset",
        "fig3b",
        "--horizon",
        "300",
        "--reps",
        "2",
        "--jobs",
        "3",
    ]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}
