use std::fs;
use std::process::{Command, Output};

use serde_json::Value;

fn re_kit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_re-kit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

#[test]
fn spectrum_of_builtin_counterexample() {
    let out = re_kit(&["spectrum", "--matrix", "builtin:counter-convex"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["schema_version"], 1);
    assert!((v["spectral_radius"].as_f64().unwrap() - 24.8).abs() < 0.05);
    assert_eq!(v["inertia"]["positive_count"], 3);
}

#[test]
fn re_of_zero_strategy_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let eta = dir.path().join("zeros.json");
    fs::write(&eta, "[0, 0, 0]").unwrap();
    let out = re_kit(&["re", "--matrix", "builtin:friedland", "--eta", eta.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["value"], 0.0);
}

#[test]
fn classify_reports_violation_and_strict_exits_3() {
    let out = re_kit(&["classify", "--matrix", "builtin:conv", "--samples", "2000"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["classification"], "violation-found");
    assert!(v["convexity_violation"]["gap"].as_f64().unwrap() > 0.0);

    let strict = re_kit(&["classify", "--matrix", "builtin:conv", "--samples", "2000", "--strict"]);
    assert_eq!(strict.status.code(), Some(3));
    assert_eq!(strict.stdout, out.stdout);
}

#[test]
fn classify_is_byte_identical_across_runs_and_thread_counts() {
    let args = ["classify", "--matrix", "builtin:conc", "--samples", "3000", "--seed", "7"];
    let a = re_kit(&args);
    let b = Command::new(env!("CARGO_BIN_EXE_re-kit"))
        .args(args)
        .env("RE_KIT_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn malformed_json_exits_1_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, "{\n  \"n\": 2,\n  \"entries\": [1, 2,, 3]\n}").unwrap();
    let out = re_kit(&["spectrum", "--matrix", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn csv_matrix_input() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.csv");
    fs::write(&path, "0,1\n1,0\n").unwrap();
    let out = re_kit(&["classify", "--matrix", path.to_str().unwrap()]);
    assert_eq!(json(&out)["classification"], "concave-certified");
}

#[test]
fn symmetrize_and_decompose() {
    let out = re_kit(&["symmetrize", "--matrix", "builtin:counter-convex"]);
    let v = json(&out);
    assert_eq!(v["status"], "obstructed");
    assert_eq!(v["witness"], serde_json::json!([0, 1, 2]));

    let out = re_kit(&["decompose", "--matrix", "builtin:friedland"]);
    let v = json(&out);
    assert_eq!(v["monatomic"], true);
    assert_eq!(v["nonzero_atoms"], serde_json::json!([[0, 1, 2]]));
}

#[test]
fn optimize_with_costs_file() {
    let dir = tempfile::tempdir().unwrap();
    let costs = dir.path().join("costs.json");
    fs::write(&costs, "[1, 1, 1]").unwrap();
    let out = re_kit(&[
        "optimize",
        "--matrix",
        "builtin:friedland",
        "--budget",
        "1",
        "--costs",
        costs.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["method"], "gradient");
    assert_eq!(v["cost_model"], "linear");
    assert!(v["cost"].as_f64().unwrap() <= 1.0 + 1e-9);

    let out = re_kit(&["optimize", "--matrix", "builtin:friedland", "--budget", "7"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn kernel_summary_and_matrix_dump() {
    let dir = tempfile::tempdir().unwrap();
    let def = dir.path().join("sis.json");
    fs::write(
        &def,
        r#"{"family": "graphon-sis", "beta": 1, "graphon": {"kind": "product"}, "theta": 1, "gamma": 1}"#,
    )
    .unwrap();
    let dump = dir.path().join("k.json");
    let out = re_kit(&[
        "kernel",
        "--kernel",
        def.to_str().unwrap(),
        "--grid",
        "64",
        "--matrix-out",
        dump.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert!((v["r0"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-4);
    assert_eq!(v["symmetrization"]["status"], "certified");

    let spectrum = re_kit(&["spectrum", "--matrix", dump.to_str().unwrap()]);
    assert_eq!(spectrum.status.code(), Some(0));
}

#[test]
fn rank_one_configuration_kernel() {
    let dir = tempfile::tempdir().unwrap();
    let def = dir.path().join("conf.json");
    fs::write(&def, r#"{"family": "configuration", "f": 1, "g": {"kind": "affine", "intercept": 0, "slope": 2}}"#).unwrap();
    let out = re_kit(&["kernel", "--kernel", def.to_str().unwrap(), "--grid", "128"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!((json(&out)["r0"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn demo_counterexample_writes_csv() {
    let out = re_kit(&["demo-counterexample", "--which", "conv", "--grid", "50"]);
    assert_eq!(out.status.code(), Some(0));
    let csv = String::from_utf8(out.stdout).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("eta1,eta2,re"));
    assert_eq!(lines.count(), 50 * 51 / 2);
    let summary: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(summary["convexity_violation"]["gap"].as_f64().unwrap() > 1e-4);
}

#[test]
fn selftest_passes() {
    let out = re_kit(&["selftest", "--samples", "2000", "--strict"]);
    let v = json(&out);
    assert_eq!(out.status.code(), Some(0), "{v:#}");
    assert_eq!(v["passed"], true);
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(re_kit(&["spectrum"]).status.code(), Some(1));
    assert_eq!(re_kit(&["spectrum", "--matrix", "builtin:nope"]).status.code(), Some(1));
    assert_eq!(re_kit(&["--help"]).status.code(), Some(0));
}
