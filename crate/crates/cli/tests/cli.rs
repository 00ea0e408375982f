use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn siegel(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_siegel"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

fn without_runtime(path: &Path) -> Value {
    let mut v: Value = serde_json::from_slice(&fs::read(path).unwrap()).unwrap();
    v.as_object_mut().unwrap().remove("runtime_secs");
    v["config"].as_object_mut().unwrap().remove("output");
    v
}

#[test]
fn trace_run_passes_and_reports_thresholds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "cfg.json",
        r#"{"scenario": "trace", "instances": 2, "seed": 3}"#,
    );
    let out = dir.path().join("report.json");
    let csv = dir.path().join("report.csv");
    let o = siegel(
        &[
            "trace",
            "--config",
            &cfg,
            "--out",
            out.to_str().unwrap(),
            "--csv",
            csv.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report: Value = serde_json::from_slice(&fs::read(&out).unwrap()).unwrap();
    let verdicts = report["verdicts"].as_array().unwrap();
    assert_eq!(verdicts.len(), 3);
    for v in verdicts {
        assert!(v["threshold"].is_number());
        assert!(v["measured"].is_number());
        assert_eq!(v["passed"], Value::Bool(true));
    }
    assert_eq!(report["config"]["seed"], 3);
    let table = fs::read_to_string(&csv).unwrap();
    assert!(table.starts_with("label,"));
    assert_eq!(table.lines().count(), 4);
}

#[test]
fn same_seed_gives_identical_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "cfg.json",
        r#"{"scenario": "domination", "instances": 2, "samples": 10}"#,
    );
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for (out, threads) in [(&a, "1"), (&b, "2")] {
        let o = siegel(
            &[
                "--threads",
                threads,
                "domination",
                "--config",
                &cfg,
                "--seed",
                "11",
                "--out",
                out.to_str().unwrap(),
            ],
            dir.path(),
        );
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(without_runtime(&a), without_runtime(&b));
}

#[test]
fn failing_verdict_sets_exit_code_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "cfg.json",
        r#"{"scenario": "trace", "instances": 1, "tolerances": {"trace_rel": 1e-15}}"#,
    );
    let o = siegel(&["trace", "--config", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let report: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(report["verdicts"]
        .as_array()
        .unwrap()
        .iter()
        .any(|v| v["passed"] == Value::Bool(false)));
}

#[test]
fn bad_inputs_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", r#"{"scenario": "trace", "p_grid": [-1]}"#);
    assert_eq!(siegel(&["trace", "--config", &bad], dir.path()).status.code(), Some(2));
    let other = write(dir.path(), "other.json", r#"{"scenario": "cutoff"}"#);
    assert_eq!(
        siegel(&["trace", "--config", &other], dir.path()).status.code(),
        Some(2)
    );
    assert_eq!(
        siegel(&["trace", "--config", "missing.json"], dir.path()).status.code(),
        Some(2)
    );
    assert_eq!(siegel(&["keylemma", "--s", "4"], dir.path()).status.code(), Some(2));
}

#[test]
fn divergent_keylemma_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = siegel(&["keylemma", "--n", "2", "--s", "4", "--t", "1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("divergent"));
}

#[test]
fn single_keylemma_record() {
    let dir = tempfile::tempdir().unwrap();
    let o = siegel(
        &["keylemma", "--n", "1", "--s", "6", "--t", "1", "--point", "[[0, 4]]"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let rec: Value = serde_json::from_slice(&o.stdout).unwrap();
    let ratio = rec["value"]["ratio"].as_f64().unwrap();
    assert!((ratio - 1.0).abs() < 1e-2);
    assert!(rec["error_estimate"].is_number());
}

#[test]
fn lattice_build_then_verify() {
    let dir = tempfile::tempdir().unwrap();
    let region = write(
        dir.path(),
        "region.json",
        r#"{"n": 1, "rho_min": 0.5, "rho_max": 2.0, "re_zn_bound": 2.0}"#,
    );
    let lat = dir.path().join("lat.json");
    let o = siegel(
        &[
            "lattice",
            "build",
            "--region",
            &region,
            "--r",
            "0.5",
            "--seed",
            "4",
            "--out",
            lat.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let o = siegel(
        &[
            "lattice",
            "verify",
            "--lattice",
            lat.to_str().unwrap(),
            "--samples",
            "5000",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["valid"], Value::Bool(true));
    assert_eq!(v["coverage"]["fraction"], 1.0);
}

#[test]
fn rank_one_schatten_norms() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(dir.path(), "m.json", r#"{"atoms": [{"point": [[0, 1]], "weight": 1}]}"#);
    let o = siegel(
        &["schatten", "--measure", &m, "--p", "0.4", "--p", "2", "--report"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let expected = 1.0 / (4.0 * std::f64::consts::PI);
    for rec in v["norms"].as_array().unwrap() {
        let got = rec["value"].as_f64().unwrap();
        assert!((got - expected).abs() <= 1e-12 * expected);
    }
    assert_eq!(v["spectrum"]["eigenvalues"].as_array().unwrap().len(), 1);
}

#[test]
fn berezin_and_averaging_of_a_point_mass() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(dir.path(), "m.json", r#"{"atoms": [{"point": [[0, 1]], "weight": 1}]}"#);
    let o = siegel(
        &["berezin", "--measure", &m, "--point", "[[0, 1]]", "--point", "[[3, 1]]"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let vals: Vec<f64> = v
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["value"].as_f64().unwrap())
        .collect();
    assert!((vals[0] - 1.0 / (4.0 * std::f64::consts::PI)).abs() < 1e-15);
    assert!(vals[1] < vals[0]);
    let o = siegel(
        &["averaging", "--measure", &m, "--point", "[[5, 1]]", "--r", "0.5"],
        dir.path(),
    );
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v[0]["value"].as_f64().unwrap(), 0.0);
}

#[test]
fn lp_norm_of_point_mass_berezin_is_the_trace() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(dir.path(), "m.json", r#"{"atoms": [{"point": [[0, 1]], "weight": 1}]}"#);
    let o = siegel(
        &["lp-norm", "--measure", &m, "--p", "1", "--tail-levels", "4"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let got = v["value"]["integral"].as_f64().unwrap();
    let expected = 1.0 / (4.0 * std::f64::consts::PI);
    assert!((got - expected).abs() < 0.02 * expected);
}
