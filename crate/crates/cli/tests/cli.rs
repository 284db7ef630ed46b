//! End-to-end checks of the command-line surface and its exit codes.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_marrow"))
}

fn scene() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/tiny.toml")
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("marrow-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn simulate_writes_trajectory_and_summary() {
    let out = tmp("sim");
    let status = bin()
        .args(["simulate", "--scene"])
        .arg(scene())
        .arg("--out")
        .arg(&out)
        .args(["--decimate", "50"])
        .status()
        .unwrap();
    assert!(status.success());
    for file in ["trajectory.csv", "design.csv", "actuation.csv", "summary.json"] {
        assert!(out.join(file).exists(), "{file} missing");
    }
    let traj = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    let mut lines = traj.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("t_s,"));
    assert!(header.contains("cg_x_m"));
    // decimate 50 at dt 2e-5: rows every 1 ms
    let first: f64 = lines.next().unwrap().split(',').next().unwrap().parse().unwrap();
    let second: f64 = lines.next().unwrap().split(',').next().unwrap().parse().unwrap();
    assert_eq!(first, 0.0);
    assert!((second - 1e-3).abs() < 1e-12);
}

#[test]
fn optimize_zero_iterations_exports_initial_design() {
    let out = tmp("opt0");
    let status = bin()
        .args(["optimize", "--scene"])
        .arg(scene())
        .arg("--out")
        .arg(&out)
        .args(["--iters", "0"])
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("design.csv").exists());
    assert!(out.join("snapshot.json").exists());
    assert!(out.join("iterations.csv").exists());
}

#[test]
fn unknown_flag_exits_with_usage_code() {
    let out = bin()
        .args(["simulate", "--scene", "x", "--definitely-not-a-flag"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_scene_is_a_runtime_failure() {
    let out = tmp("missing");
    let status = bin()
        .args(["simulate", "--scene", "/nonexistent/scene.toml", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn analyze_recovers_a_synthetic_tone() {
    let out = tmp("analyze");
    let csv = out.join("actuation.csv");
    let mut text = String::from("t_s,V_in_0,V_in_1\n");
    let dt = 1.0 / 500.0;
    for i in 0..250 {
        let t = i as f64 * dt;
        let rear = (2.0 * std::f64::consts::PI * 10.0 * t).sin();
        let front = (2.0 * std::f64::consts::PI * 10.0 * t - 1.747).sin();
        text.push_str(&format!("{t},{rear},{front}\n"));
    }
    std::fs::write(&csv, text).unwrap();
    let output = bin()
        .args(["analyze", "--input"])
        .arg(&csv)
        .args(["--cycle-duration", "0.5"])
        .output()
        .unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("10.00 Hz"), "stdout: {stdout}");
    assert!(stdout.contains("1.747"), "stdout: {stdout}");
}

#[test]
fn export_round_trips_snapshot_variables() {
    let out = tmp("export");
    // produce a snapshot via optimize --iters 0
    let status = bin()
        .args(["optimize", "--scene"])
        .arg(scene())
        .arg("--out")
        .arg(&out)
        .args(["--iters", "0"])
        .status()
        .unwrap();
    assert!(status.success());
    let out2 = tmp("export2");
    let status = bin()
        .args(["export", "--scene"])
        .arg(scene())
        .arg("--out")
        .arg(&out2)
        .arg("--resume")
        .arg(out.join("snapshot.json"))
        .status()
        .unwrap();
    assert!(status.success());
    let a = std::fs::read_to_string(out.join("design.csv")).unwrap();
    let b = std::fs::read_to_string(out2.join("design.csv")).unwrap();
    assert_eq!(a, b);
}
