use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ksopt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ksopt")).args(args).output().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn small_run(dir: &Path, preset: &str) -> Output {
    ksopt(&[
        "run",
        "--preset",
        preset,
        "--out",
        dir.to_str().unwrap(),
        "--set",
        "J=10",
        "--set",
        "N=8",
        "--set",
        "max_iter=5",
        "--progress",
        "0",
    ])
}

#[test]
fn unknown_preset_is_an_input_error() {
    let out = ksopt(&["run", "--preset", "nope"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("nope"), "{}", stderr(&out));
}

#[test]
fn unknown_config_key_is_reported_with_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.toml");
    fs::write(&path, "preset = \"bdc_case1\"\nmax_iter = 3\nbogus = 1\n").unwrap();
    let out = ksopt(&["run", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let msg = stderr(&out);
    assert!(msg.contains("bogus") && msg.contains("line 3"), "{msg}");
}

#[test]
fn invalid_grid_is_rejected_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let out = ksopt(&["run", "--preset", "bdc_case1", "--set", "J=0", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(fs::read_dir(dir.path()).unwrap().next().is_none());
}

#[test]
fn missing_arguments_fail() {
    assert_eq!(ksopt(&["run"]).status.code(), Some(1));
    assert_eq!(ksopt(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(ksopt(&["--help"]).status.code(), Some(0));
}

#[test]
fn run_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = small_run(dir.path(), "bdc_case4");
    assert!(out.status.success(), "{}", stderr(&out));
    for name in [
        "state_u.csv",
        "state_v.csv",
        "adjoint_phi.csv",
        "adjoint_psi.csv",
        "control_f.csv",
        "control_g.csv",
        "target_ud.csv",
        "trace.csv",
        "scan.csv",
        "config.toml",
        "metadata.json",
    ] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
    let state = fs::read_to_string(dir.path().join("state_u.csv")).unwrap();
    assert_eq!(state.lines().count(), 1 + 9);
    assert_eq!(state.lines().next().unwrap().split(',').count(), 1 + 10);
    let trace = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 1 + 5);
    let config = fs::read_to_string(dir.path().join("config.toml")).unwrap();
    assert!(config.contains("max_iter = 5"), "{config}");
}

#[test]
fn written_config_reproduces_the_run() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert!(small_run(a.path(), "rbc_full").status.success());
    let config = a.path().join("config.toml");
    let out = ksopt(&["run", "--config", config.to_str().unwrap(), "--out", b.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    for name in ["state_u.csv", "control_g.csv", "trace.csv"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }
}

#[test]
fn scan_of_a_finished_run() {
    let dir = tempfile::tempdir().unwrap();
    assert!(small_run(dir.path(), "bdc_case1").status.success());
    let target = dir.path().join("mine.csv");
    let out = ksopt(&[
        "scan",
        "--run",
        dir.path().to_str().unwrap(),
        "--amplitudes",
        "-0.1,0,0.1",
        "--out",
        target.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = fs::read_to_string(&target).unwrap();
    let costs: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(costs.len(), 3);
    assert!(costs.iter().all(|c| c.is_finite() && *c >= 0.0));
    assert_eq!(String::from_utf8_lossy(&out.stdout), text);
}

#[test]
fn scan_of_missing_run_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = ksopt(&["scan", "--run", dir.path().to_str().unwrap(), "--amplitudes", "0"]);
    assert_ne!(out.status.code(), Some(0));
}

#[test]
fn verify_passes() {
    let out = ksopt(&["verify", "--seed", "3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 5, "{text}");
}
