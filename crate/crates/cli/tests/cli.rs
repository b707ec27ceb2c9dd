use serde_json::Value;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = r#"{
  "instance": {
    "k": 1,
    "bandlimit": 200.0,
    "window": 1.0,
    "separation": { "min_gap": 1.0, "unit": "hash-scale" },
    "amplitude": { "min": 1.0, "max": 2.0 }
  },
  "noise": { "kind": "fixed-tones", "level": 0.1 },
  "pipeline": { "rho": 0.5, "resolution": 1.0, "hash_scale": 60.0 },
  "trials": 2,
  "seed": 3
}"#;

fn recover(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_recover"));
    cmd.args(args).env_remove("RECOVER_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

#[test]
fn config_problems_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&recover(&[], &[])), 2);
    let missing = dir.path().join("nope.json");
    assert_eq!(code(&recover(&["--config", missing.to_str().unwrap()], &[])), 2);
    let bad = write_config(dir.path(), r#"{ "instance": { "k": 0, "bandlimit": 1.0, "window": 1.0 } }"#);
    let out = recover(&["--config", &bad, "--out", dir.path().join("o").to_str().unwrap()], &[]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
    let good = write_config(dir.path(), CONFIG);
    assert_eq!(code(&recover(&["--config", &good, "--sweep", "2,4"], &[])), 2);
    assert_eq!(code(&recover(&["--config", &good, "--stage", "half"], &[])), 2);
    assert_eq!(code(&recover(&["--config", &good], &[("RECOVER_THREADS", "0")])), 2);
}

#[test]
fn unwritable_output_fails_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let blocker = dir.path().join("file");
    fs::write(&blocker, b"x").unwrap();
    let out = recover(&["--config", &cfg, "--out", blocker.join("sub").to_str().unwrap()], &[]);
    assert_eq!(code(&out), 1);
    assert!(out.stdout.is_empty());
}

#[test]
fn full_run_writes_reports_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let out_dir = dir.path().join("out");
    let out = recover(
        &["--config", &cfg, "--out", out_dir.to_str().unwrap(), "--trials", "1", "--seed", "11", "--emit-plots"],
        &[("RECOVER_THREADS", "1")],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["report.json", "trials.csv", "timings.csv", "errors.svg", "queries.svg"] {
        assert!(out_dir.join(name).is_file(), "{name}");
    }
    let report: Value = serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["config"]["seed"], 11);
    assert_eq!(report["trials"].as_array().unwrap().len(), 1);
    assert!(report["trials"][0]["error"].as_f64().is_some());
}

#[test]
fn frequency_stage_skips_the_fit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let out_dir = dir.path().join("out");
    let out = recover(&["--config", &cfg, "--out", out_dir.to_str().unwrap(), "--stage", "freq"], &[]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    for t in report["trials"].as_array().unwrap() {
        assert!(t["error"].is_null());
        assert_eq!(t["queries"]["signal"], 0);
        assert!(t["queries"]["frequency"].as_u64().unwrap() > 0);
    }
}

#[test]
fn sweep_writes_a_table_per_k() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let out_dir = dir.path().join("sweep");
    let out = recover(
        &["--config", &cfg, "--out", out_dir.to_str().unwrap(), "--stage", "freq", "--sweep", "k=1,2", "--emit-plots"],
        &[],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("slopes: frequency="), "{stdout}");
    for name in ["sweep.json", "sweep.csv", "sweep.svg", "k1/report.json", "k2/report.json"] {
        assert!(out_dir.join(name).is_file(), "{name}");
    }
    let table: Value = serde_json::from_str(&fs::read_to_string(out_dir.join("sweep.json")).unwrap()).unwrap();
    assert_eq!(table["rows"].as_array().unwrap().len(), 2);
}
