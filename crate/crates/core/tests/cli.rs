use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn frtb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_frtb")).args(args).output().unwrap()
}

fn run_ok(args: &[&str]) {
    let out = frtb(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn reruns_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        run_ok(&["allocate", "--preset", "sim43.setA", "--seed", "3", "--out", s(out)]);
        run_ok(&["simulate", "--preset", "sim43.setA", "--seed", "3", "--out", s(&out.join("sim"))]);
    }
    for name in [
        "allocation_euler.csv",
        "allocation_cas-scaled_raw.csv",
        "bucket_percent.csv",
        "position_alloc.csv",
        "reconciliation.json",
        "manifest.json",
        "sim/current.csv",
        "sim/stress.csv",
    ] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn outputs_carry_manifest_hash_and_reconcile() {
    let dir = TempDir::new().unwrap();
    let out = dir.path();
    run_ok(&["allocate", "--preset", "sim41.iii", "--seed", "1", "--out", s(out)]);
    let manifest = json(&out.join("manifest.json"));
    let hash = manifest["sha256"].as_str().unwrap();
    let first = fs::read_to_string(out.join("allocation_cas.csv")).unwrap();
    assert_eq!(first.lines().next().unwrap(), format!("# manifest_sha256={hash}"));
    let rec = json(&out.join("reconciliation.json"));
    assert_eq!(rec["manifest_hash"], hash);
    for scheme in rec["schemes"].as_array().unwrap() {
        let gap = scheme["abs_gap"].as_f64().unwrap();
        let total = scheme["imcc_total"].as_f64().unwrap();
        assert!(gap <= 1e-9 * total);
    }
}

#[test]
fn simulated_files_feed_back_in() {
    let dir = TempDir::new().unwrap();
    let sim = dir.path().join("sim");
    run_ok(&["simulate", "--preset", "sim43.setB", "--seed", "2", "--out", s(&sim)]);
    let from_files = dir.path().join("files");
    run_ok(&[
        "imcc",
        "--current",
        s(&sim.join("current.csv")),
        "--stress",
        s(&sim.join("stress.csv")),
        "--mask",
        s(&sim.join("mask.json")),
        "--out",
        s(&from_files),
    ]);
    let from_preset = dir.path().join("preset");
    run_ok(&["imcc", "--preset", "sim43.setB", "--seed", "2", "--out", s(&from_preset)]);
    let a = json(&from_files.join("es_report.json"))["imcc_total"].as_f64().unwrap();
    let b = json(&from_preset.join("es_report.json"))["imcc_total"].as_f64().unwrap();
    assert!((a - b).abs() <= 1e-12 * b, "{a} vs {b}");
}

#[test]
fn hist20_extremes_ordering() {
    let dir = TempDir::new().unwrap();
    for seed in ["0", "4", "7"] {
        let out = dir.path().join(seed);
        run_ok(&["allocate", "--preset", "sim42.hist20", "--seed", seed, "--out", s(&out)]);
        let ext = json(&out.join("extremes.json"));
        let min = |name: &str| {
            ext.as_array()
                .unwrap()
                .iter()
                .find(|e| e["scheme"] == name)
                .unwrap()["bucket_min"]
                .as_f64()
                .unwrap()
                .abs()
        };
        assert!(min("cas") < min("euler"), "seed {seed}");
        assert!(min("euler") < min("regular-euler"), "seed {seed}");
    }
}

fn write_cube(path: &Path, rows: &[(&str, &str, u32, &[f64])]) {
    let mut text = String::from("position_id,risk_class,liquidity_horizon_days,scenario_index,loss\n");
    for (p, c, d, losses) in rows {
        for (m, x) in losses.iter().enumerate() {
            text.push_str(&format!("{p},{c},{d},{m},{x}\n"));
        }
    }
    fs::write(path, text).unwrap();
}

#[test]
fn single_position_takes_everything() {
    let dir = TempDir::new().unwrap();
    let cube = dir.path().join("one.csv");
    let losses: Vec<f64> = (0..60).map(|m| ((m * 7919) % 61) as f64 / 10.0 - 3.0).collect();
    let other: Vec<f64> = (0..60).map(|m| ((m * 104_729) % 59) as f64 / 20.0 - 1.0).collect();
    write_cube(&cube, &[("P1", "EQ", 10, &losses), ("P1", "IR", 40, &other)]);
    let out = dir.path().join("out");
    run_ok(&["allocate", "--current", s(&cube), "--out", s(&out)]);
    let text = fs::read_to_string(out.join("position_alloc.csv")).unwrap();
    let mut rows = 0;
    for line in text.lines().skip(2) {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols[1], "P1");
        let pct: f64 = cols[3].parse().unwrap();
        assert!((pct - 100.0).abs() < 1e-9, "{line}");
        rows += 1;
    }
    assert_eq!(rows, 5);
}

#[test]
fn zero_cube_gives_zero_charge() {
    let dir = TempDir::new().unwrap();
    let cube = dir.path().join("zero.csv");
    write_cube(&cube, &[("P1", "CM", 10, &[0.0; 20]), ("P2", "FX", 120, &[0.0; 20])]);
    let out = dir.path().join("out");
    run_ok(&["imcc", "--current", s(&cube), "--out", s(&out)]);
    let report = json(&out.join("es_report.json"));
    assert_eq!(report["imcc_total"].as_f64().unwrap(), 0.0);
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("x");
    assert_eq!(frtb(&["simulate", "--preset", "nope", "--out", s(&out)]).status.code(), Some(3));
    assert_eq!(frtb(&["imcc", "--out", s(&out)]).status.code(), Some(3));
    assert_eq!(frtb(&["frobnicate"]).status.code(), Some(3));
    let missing = dir.path().join("missing.csv");
    assert_eq!(frtb(&["imcc", "--current", s(&missing), "--out", s(&out)]).status.code(), Some(3));
    // the CM class loses too much of its ES in Set A's reduced set
    let v = frtb(&["validate", "--preset", "sim43.setA", "--seed", "0", "--out", s(&out)]);
    assert_eq!(v.status.code(), Some(2));
    assert!(json(&out.join("validation.json"))["checks"].is_array());
}

#[test]
fn bad_cube_is_rejected() {
    let dir = TempDir::new().unwrap();
    let cube = dir.path().join("bad.csv");
    fs::write(&cube, "position_id,risk_class,liquidity_horizon_days,scenario_index,loss\nP1,XX,10,0,1.0\n").unwrap();
    let out = frtb(&["imcc", "--current", s(&cube), "--out", s(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(3));
    assert!(!out.stderr.is_empty());
}
