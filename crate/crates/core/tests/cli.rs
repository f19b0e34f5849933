//! Runs the command-line binary end to end on tiny configurations.

use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = "years=1\nspinup_cycles=0\nmembers=12\niterations=2000\neval_members=6\n";

fn run(dir: &Path, config: &str, args: &[&str]) -> Output {
    let cfg = dir.join("run.cfg");
    std::fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_lsm-surrogate"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn twin_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let timing = dir.path().join("timing.txt");
    let o = run(dir.path(), TINY, &["twin", "--workers", "2", "--timing", timing.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = dir.path().join("out");
    for f in [
        "observations.csv",
        "truth_states.csv",
        "ensemble.csv",
        "surrogate.txt",
        "chain.csv",
        "histograms.csv",
        "correlation.csv",
        "scores.csv",
        "skill_members.csv",
        "summary.txt",
    ] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    // no size study unless asked for
    assert!(!out.join("size_study.csv").exists());
    let summary = std::fs::read_to_string(out.join("summary.txt")).unwrap();
    assert_eq!(String::from_utf8_lossy(&o.stdout), summary);
    assert!(summary.contains("theta2 (n): truth=0.4"));
    // timing stays out of the artifacts
    assert!(!summary.contains("speedup"));
    assert!(stderr(&o).contains("speedup"));
    assert!(std::fs::read_to_string(timing).unwrap().contains("s per run"));
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let a = run(dir.path(), TINY, &["ensemble", "--seed", "3"]);
    assert!(a.status.success(), "{}", stderr(&a));
    let first = std::fs::read(dir.path().join("out/ensemble.csv")).unwrap();
    let b = run(dir.path(), &format!("{TINY}seed=3\n"), &["ensemble"]);
    assert!(b.status.success());
    assert_eq!(first, std::fs::read(dir.path().join("out/ensemble.csv")).unwrap());
    let c = run(dir.path(), TINY, &["ensemble", "--seed", "4"]);
    assert!(c.status.success());
    assert_ne!(first, std::fs::read(dir.path().join("out/ensemble.csv")).unwrap());
}

#[test]
fn failing_stage_is_named_and_keeps_earlier_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    // too few members for a surrogate
    let o = run(dir.path(), "years=1\nspinup_cycles=0\nmembers=4\n", &["twin"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("stage `fit` failed"), "{}", stderr(&o));
    let out = dir.path().join("out");
    assert!(out.join("observations.csv").is_file());
    assert!(out.join("ensemble.csv").is_file());
    assert!(!out.join("surrogate.txt").exists());
}

#[test]
fn missing_input_file_fails_its_stage() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), TINY, &["sample"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("stage `sample` failed"), "{}", stderr(&o));
}

#[test]
fn config_errors_report_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), "years=1\nmembrs=10\n", &["ensemble"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
    assert!(stderr(&o).contains("membrs"));

    let o = run(dir.path(), "sigma_o=0\n", &["ensemble"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("sigma_o"), "{}", stderr(&o));
}

#[test]
fn split_needs_more_years_than_the_training_period() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), "years=2\nspinup_cycles=0\nmembers=12\n", &["ensemble", "--split"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("stage `truth` failed"), "{}", stderr(&o));
}

#[test]
fn split_run_evaluates_on_later_years() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "years=4\nspinup_cycles=0\nmembers=12\niterations=2000\neval_members=6\n";
    let o = run(dir.path(), cfg, &["twin", "--split"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let obs = std::fs::read_to_string(dir.path().join("out/observations.csv")).unwrap();
    let last_hour: usize = obs
        .lines()
        .filter(|l| !l.starts_with('#'))
        .filter_map(|l| l.split(',').next()?.parse().ok())
        .max()
        .unwrap();
    assert!(last_hour < 3 * 8760);
    let summary = std::fs::read_to_string(dir.path().join("out/summary.txt")).unwrap();
    assert!(summary.contains("split=true"));
    assert!(!summary.contains("validation_r2"));
}
