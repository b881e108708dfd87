use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn cylconvex(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cylconvex")).args(args).current_dir(cwd).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

#[test]
fn list_examples_names_every_builtin() {
    let dir = tempfile::tempdir().unwrap();
    let out = cylconvex(&["list-examples"], dir.path());
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["t2-standard", "t2-doubled", "r2-on-t2", "linear-torus-rep"] {
        assert!(text.contains(name), "{name} missing from {text}");
    }
}

#[test]
fn schema_is_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = cylconvex(&["schema"], dir.path());
    assert_eq!(code(&out), 0);
    let schema: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(schema["title"], "cylconvex run report");
}

#[test]
fn example_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = cylconvex(&["example", "t2-standard", "--resolution", "8", "--out", "res"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("PASS path_independence"));
    assert!(!stdout.contains("FAIL"));
    for file in ["report.json", "summary.json", "polylines.csv"] {
        assert!(dir.path().join("res").join(file).is_file(), "{file} not written");
    }
    let report: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("res/report.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], Value::Bool(true));
}

#[test]
fn unknown_example_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = cylconvex(&["example", "no-such-example"], dir.path());
    assert_eq!(code(&out), 1);
}

#[test]
fn malformed_config_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.json"), r#"{"schema_version": 1, "model": {"kind": "nonsense"}}"#).unwrap();
    let out = cylconvex(&["run", "--config", "bad.json"], dir.path());
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.json"));
    let missing = cylconvex(&["run", "--config", "missing.json"], dir.path());
    assert_eq!(code(&missing), 1);
}

#[test]
fn non_closed_holonomy_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{
        "schema_version": 1,
        "model": {
            "kind": "torus",
            "omega": [[0, 1], [-1, 0]],
            "periods": [6.283185307179586, 6.283185307179586],
            "generators": [[1, 1.4142135623730951]]
        },
        "mesh": {"resolution": 8},
        "tasks": ["holonomy"]
    }"#;
    std::fs::write(dir.path().join("irrational.json"), cfg).unwrap();
    let out = cylconvex(&["run", "--config", "irrational.json"], dir.path());
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn failing_check_exits_three_and_still_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let mut points = String::from("x0,v0\n");
    for i in 0..20 {
        let v = if i < 10 { 0.1 * i as f64 } else { 10.0 + 0.1 * i as f64 };
        points.push_str(&format!("{i},{v}\n"));
    }
    std::fs::write(dir.path().join("points.csv"), points).unwrap();
    let cfg = r#"{
        "schema_version": 1,
        "model": {"kind": "builtin", "name": "t2-standard"},
        "mesh": {"resolution": 8},
        "tasks": ["harness"],
        "tolerances": {"tol_convexity": 0.25},
        "sampled_map": {"points_csv": "points.csv", "adjacency_radius": 1.5}
    }"#;
    std::fs::write(dir.path().join("gap.json"), cfg).unwrap();
    let out = cylconvex(&["run", "--config", "gap.json", "--out", "res"], dir.path());
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8(out.stdout).unwrap().contains("FAIL weak_convexity"));
    let summary: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("res/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["exit_code"], Value::from(3));
}
