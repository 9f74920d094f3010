use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_metasparse")).args(args).output().expect("binary runs")
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn synth_then_novel_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("gen.json");
    std::fs::write(&cfg, r#"{"p": 20, "k": 3, "l": 6, "T": 4, "sigma_eps": 0.0, "sigma_delta": 0.0, "seed": 3}"#).unwrap();
    let data = dir.path().join("data");
    let out = run(&["synth", "--config", arg(&cfg), "--out", arg(&data), "--l-novel", "12"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(data.join("task_0004.csv").exists());

    let support = dir.path().join("support.csv");
    std::fs::write(&support, "index\n0\n1\n2\n").unwrap();
    let report = dir.path().join("novel.json");
    let out = run(&["novel", "--dataset", arg(&data), "--support", arg(&support), "--out", arg(&report), "--c", "0.01"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["refit"], true);
    assert!(json["linf_error"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn phase_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("spec.json");
    std::fs::write(&cfg, r#"{"base": {"p": 30, "k": 3}, "sweep": {"C_values": [1, 4]}, "reps": 5, "master_seed": 9}"#).unwrap();
    let csv = dir.path().join("phase.csv");
    let out = run(&["phase", "--config", arg(&cfg), "--out", arg(&csv)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next().unwrap(), metasparse::bench::CSV_HEADER);
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn bad_config_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("spec.json");
    std::fs::write(&cfg, r#"{"sweep": {}, "reps": 0}"#).unwrap();
    let out = run(&["phase", "--config", arg(&cfg), "--out", arg(&dir.path().join("x.csv"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn missing_input_exits_with_three() {
    let out = run(&["realdata", "--csv", "/nonexistent/table.csv", "--out", "/tmp/unused.csv"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn fixture_has_the_expected_geometry() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("planted.csv");
    assert!(run(&["fixture", "--out", arg(&csv)]).status.success());
    let table = metasparse::realdata::load_expression_csv(&csv, "EGR2").unwrap();
    assert_eq!(table.shape(), (8, 120, 45));
}
