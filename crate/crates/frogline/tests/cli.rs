//! The binary end to end: artifacts, determinism and exit codes.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn frogline(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_frogline")).args(args).arg("--out-dir").arg(dir).output().expect("binary runs")
}

fn ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn simulate_is_byte_identical_across_repeats_and_threads() {
    let tmp = tempfile::tempdir().unwrap();
    let mut logs = Vec::new();
    for (k, threads) in ["1", "1", "2", "3"].iter().enumerate() {
        let id = format!("run{k}");
        let args = [
            "simulate",
            "--eta",
            "0.05",
            "--seed",
            "42",
            "--replicas",
            "6",
            "--horizon",
            "1",
            "--threads",
            threads,
            "--run-id",
            &id,
        ];
        ok(&frogline(tmp.path(), &args));
        logs.push(fs::read(tmp.path().join(&id).join("events.jsonl")).unwrap());
    }
    assert!(!logs[0].is_empty());
    assert!(logs.iter().all(|l| *l == logs[0]));

    let root = tmp.path().join("run0");
    for name in ["manifest.json", "snapshots.csv", "summary.json"] {
        assert!(root.join(name).exists(), "{name}");
    }
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(root.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 42);
    assert_eq!(manifest["config"]["model"]["eta"], 0.05);
    let first = String::from_utf8(logs[0].clone()).unwrap();
    let line: serde_json::Value = serde_json::from_str(first.lines().next().unwrap()).unwrap();
    for key in ["replica", "time", "site", "jump_size", "v", "index"] {
        assert!(line.get(key).is_some(), "{key}");
    }
    let snaps = fs::read_to_string(root.join("snapshots.csv")).unwrap();
    assert_eq!(snaps.lines().next().unwrap(), frogline::io::SNAPSHOT_HEADER);
}

#[test]
fn sweep_writes_one_manifest_per_run() {
    let tmp = tempfile::tempdir().unwrap();
    let args = ["sweep", "--etas", "0.1,0.05,0.02", "--replicas", "100", "--horizon", "0.5", "--run-id", "sw"];
    ok(&frogline(tmp.path(), &args));
    let root = tmp.path().join("sw");
    let mut manifests = 0;
    for eta in fs::read_dir(root.join("runs")).unwrap() {
        for rep in fs::read_dir(eta.unwrap().path()).unwrap() {
            manifests += rep.unwrap().path().join("manifest.json").exists() as usize;
        }
    }
    assert_eq!(manifests, 300);
    let agg = fs::read_to_string(root.join("aggregate.csv")).unwrap();
    assert_eq!(agg.lines().count(), 301);
    assert!(agg.starts_with("eta,replica,outcome,ustar,wakeups,end_time,max_mass_drift"));
}

#[test]
fn other_commands_write_their_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&frogline(tmp.path(), &["mp0", "--replicas", "200", "--run-id", "a"]));
    for name in ["trajectory.csv", "wake_times.csv", "reports/martingale.json", "manifest.json"] {
        assert!(tmp.path().join("a").join(name).exists(), "{name}");
    }

    let system = tmp.path().join("system.json");
    fs::write(&system, r#"{"sites": [0, 1], "q": [[-1.0, 1.0], [0.0, 0.0]], "x1": [2, 0], "x2": [0, 0.5]}"#).unwrap();
    ok(&frogline(tmp.path(), &["mps", "--system", system.to_str().unwrap(), "--replicas", "50", "--run-id", "b"]));
    let events = fs::read_to_string(tmp.path().join("b/events.jsonl")).unwrap();
    assert!(events.lines().all(|l| l.contains("\"site\":1")));

    ok(&frogline(tmp.path(), &["ppp", "--replicas", "5", "--rmin", "0.01", "--rect", "0.2,0.6,0.3", "--run-id", "c"]));
    for name in ["pattern.jsonl", "thresholds.csv", "ustar.csv", "reports/coupling.json", "manifest.json"] {
        assert!(tmp.path().join("c").join(name).exists(), "{name}");
    }
}

#[test]
fn invalid_config_exits_2_with_line() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    fs::write(&cfg, "[model]\nhorizon = 1.0\neta = 0.015\n").unwrap();
    let out = frogline(tmp.path(), &["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.toml:3:"), "{err}");

    fs::write(&cfg, "[solver]\ndx = 0.01\nbogus = 2\n").unwrap();
    let out = frogline(tmp.path(), &["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.toml:3:"));

    let out = frogline(tmp.path(), &["simulate", "--eta", "0.013"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn flags_override_the_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    fs::write(&cfg, "[model]\neta = 0.1\nhorizon = 0.5\n\n[sampling]\nseed = 5\nreplicas = 2\n").unwrap();
    ok(&frogline(tmp.path(), &["simulate", "--config", cfg.to_str().unwrap(), "--eta", "0.05", "--run-id", "o"]));
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(tmp.path().join("o/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["model"]["eta"], 0.05);
    assert_eq!(manifest["seed"], 5);
}

#[test]
fn verify_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = frogline(tmp.path(), &["verify", "--criteria", "9,10", "--run-id", "v"]);
    ok(&out);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("criterion  9 PASS") && stdout.contains("criterion 10 PASS"), "{stdout}");
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(tmp.path().join("v/reports/acceptance.json")).unwrap()).unwrap();
    assert_eq!(report["all_pass"], true);

    let out = frogline(tmp.path(), &["verify", "--criteria", "11", "--run-id", "w"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("criterion 11 FAIL"));
}
