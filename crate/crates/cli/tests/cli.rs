use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const CLASSIC: &str = r#"{
  "delta": {"expr": "1", "class": "constant"},
  "terms": [{
    "p": {"expr": "e", "class": "constant"},
    "a": {"expr": "1", "class": "constant"},
    "tau": {"expr": "1", "class": "constant"},
    "sigma": {"expr": "0.5", "class": "constant"}
  }]
}"#;

const PERIODIC: &str = r#"{
  "beta_form": {"beta": {"expr": "1+0.5*cos(2*pi*t)", "class": "periodic", "period": 1},
                "delta": 0.1, "p": [0.2718281828459045], "a": [1]},
  "terms": [{
    "tau": {"expr": "0.1*(1+cos(2*pi*t))", "class": "periodic", "period": 1},
    "sigma": {"expr": "0.2", "class": "constant"}
  }]
}"#;

fn nicholson(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nicholson"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_model(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.display().to_string()
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn check_prints_criteria_report() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path(), "m.json", CLASSIC);
    let out = nicholson(&["check", &model]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["K"]["K"], 1.0);
    assert_eq!(v["verdicts"]["K2"]["pass"], true);
}

#[test]
fn check_writes_to_out_file() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path(), "m.json", CLASSIC);
    let out_path = dir.path().join("report.json");
    let out = nicholson(&["check", &model, "--out", out_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(out_path).unwrap()).unwrap();
    assert!(v["verdicts"]["A0"]["pass"].as_bool().unwrap());
}

#[test]
fn simulate_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path(), "m.json", CLASSIC);
    let csv = dir.path().join("x.csv");
    let out = nicholson(&[
        "simulate", &model, "--history", "0.5+0.1*t", "--t-end", "5", "--csv", csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,x"));
    assert_eq!(text.lines().count(), 502);
    let last: Vec<f64> = text.lines().last().unwrap().split(',').map(|s| s.parse().unwrap()).collect();
    assert_eq!(last[0], 5.0);
}

#[test]
fn verify_passes_for_attractive_model() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path(), "m.json", CLASSIC);
    let out = nicholson(&["verify", &model, "--pairs", "0.5:2", "--t-end", "300"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["attractivity"]["status"], "certified");
    assert_eq!(v["attractivity"]["certificate"], "K2");
}

#[test]
fn verify_reports_failure_with_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path(), "m.json", CLASSIC);
    let out = nicholson(&["verify", &model, "--t-end", "3", "--tol", "1e-12"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn periodic_finds_equilibrium() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path(), "p.json", PERIODIC);
    let csv = dir.path().join("period.csv");
    let out = nicholson(&["periodic", &model, "--omega", "1", "--t-end", "150", "--csv", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    let m = v["periodic"]["m_star"].as_f64().unwrap();
    let big_m = v["periodic"]["M_star"].as_f64().unwrap();
    assert!((m - 1.0).abs() < 1e-8 && (big_m - 1.0).abs() < 1e-8);
    assert!(csv.exists());
}

#[test]
fn map_sweep_and_violation() {
    let out = nicholson(&["map", "--K", "1", "--a-plus", "1", "--zeta-plus", "0.5", "--sweep"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["sweep"]["pass"], true);
    let out = nicholson(&["map", "--K", "1", "--a-plus", "1", "--zeta-plus", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let out = nicholson(&["map", "--K", "1", "--a-plus", "57", "--zeta-plus", "0.05129329438755058", "--diagnostic", "--sweep"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(json(&out)["sweep"]["cycles"].as_u64().unwrap() > 0);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(nicholson(&["repro", "nope"]).status.code(), Some(2));
    assert_eq!(nicholson(&["check", "/nonexistent/model.json"]).status.code(), Some(2));
    assert_eq!(nicholson(&["frobnicate"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path(), "bad.json", r#"{"terms": []}"#);
    assert_eq!(nicholson(&["check", &model]).status.code(), Some(2));
}

#[test]
fn repro_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = nicholson(&["repro", "er2019", "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("er2019.json")).unwrap()).unwrap();
    assert_eq!(v["status"], "certified");
    for name in v["artifacts"].as_array().unwrap() {
        assert!(dir.path().join(name.as_str().unwrap()).exists());
    }
}
