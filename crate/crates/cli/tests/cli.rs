//! End-to-end runs of the `heatopt` binary on tiny grids.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn heatopt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_heatopt")).args(args).env_remove("HEATOPT_OUT").output().expect("spawn heatopt")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Drops the last column (wall-clock seconds) from every row.
fn without_seconds(csv: &str) -> String {
    csv.lines().map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head)).collect::<Vec<_>>().join("\n")
}

#[test]
fn solve_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let o = heatopt(&["solve", "--example", "example1", "--M", "8", "--level", "0", "--out", arg(dir.path())]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["report.csv", "history.csv", "control.csv", "solve.log"] {
        assert!(dir.path().join(f).is_file(), "missing {f}");
    }
    let report = fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert!(report.contains("converged,true"), "{report}");
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let o = heatopt(&["solve", "--bogus"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn bad_config_file_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.cfg");
    fs::write(&path, "[grid]\nsteps = 4\n").unwrap();
    let o = heatopt(&["solve", "--config", arg(&path), "--out", arg(dir.path())]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown key"));
}

#[test]
fn incompatible_control_is_a_usage_error() {
    let o = heatopt(&["solve", "--example", "example2", "--control", "cells", "--M", "8", "--level", "0"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn iteration_cap_reports_non_convergence() {
    let dir = tempfile::tempdir().unwrap();
    let o = heatopt(&["solve", "--example", "example2", "--M", "8", "--level", "0", "--max-outer", "1", "--out", arg(dir.path())]);
    assert_eq!(code(&o), 3);
}

#[test]
fn config_file_values_apply_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.cfg");
    fs::write(&path, "[problem]\nexample = example1\n[grid]\nM = 6\nlevel = 0\n").unwrap();
    let o = heatopt(&["solve", "--config", arg(&path), "--M", "4", "--out", arg(dir.path())]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert!(report.contains("\nM,4\n"), "{report}");
}

#[test]
fn output_root_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_heatopt"))
        .args(["solve", "--example", "example1", "--M", "4", "--level", "0"])
        .env("HEATOPT_OUT", dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("solve").join("example1").join("report.csv").is_file());
}

#[test]
fn study_rows_and_reruns_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let run = |d: &Path| heatopt(&["study", "--example", "example1", "--axis", "space", "--levels", "0,1,2", "--M", "8", "--out", arg(d)]);
    for d in [a.path(), b.path()] {
        let o = run(d);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let sa = fs::read_to_string(a.path().join("study.csv")).unwrap();
    let sb = fs::read_to_string(b.path().join("study.csv")).unwrap();
    assert_eq!(sa.lines().count(), 4);
    assert_eq!(without_seconds(&sa), without_seconds(&sb));
    assert!(a.path().join("study.svg").is_file());
    for f in ["control.csv", "history.csv"] {
        let x = fs::read(a.path().join("finest").join(f)).unwrap();
        let y = fs::read(b.path().join("finest").join(f)).unwrap();
        assert_eq!(x, y, "{f} differs between reruns");
    }
}

#[test]
fn too_short_study_is_rejected() {
    let o = heatopt(&["study", "--example", "example1", "--levels", "0,1", "--M", "4"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn ssc_sweep_on_a_small_grid() {
    let dir = tempfile::tempdir().unwrap();
    let o = heatopt(&["ssc", "--example", "example2", "--alphas", "1", "--grids", "8:1", "--out", arg(dir.path())]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("ssc.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2, "{csv}");
    assert!(dir.path().join("ssc_table.txt").is_file());
}

#[test]
fn selfcheck_battery_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = heatopt(&["selfcheck", "--out", arg(dir.path())]);
    assert_eq!(code(&o), 0, "{}{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("selfcheck.csv").is_file());
}
