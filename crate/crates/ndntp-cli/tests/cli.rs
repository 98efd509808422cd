//! Exit codes and file outputs of the ndntp-sim binary.

use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ndntp-sim"))
}

fn tempdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("ndntp-cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn scenarios_list_names_builtins() {
    let out = bin().args(["scenarios", "list"]).output().unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    let names: Vec<&str> = stdout.lines().collect();
    assert!(names.len() >= 8, "{names:?}");
    for expected in [
        "fig2",
        "session-pin",
        "path-label",
        "hop-limit",
        "probabilistic",
        "freshness",
        "agg-skew",
        "delay-attack",
        "strata",
    ] {
        assert!(names.contains(&expected), "missing {expected}");
    }
}

#[test]
fn run_writes_outputs_and_exits_zero() {
    let dir = tempdir("run");
    let out = bin()
        .args([
            "run",
            "--scenario",
            "fig2",
            "--pit-mode",
            "aggregate",
            "--seed",
            "42",
            "--out",
        ])
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(dir.join("metrics.csv").exists());
    assert!(dir.join("trail.jsonl").exists());
    assert!(dir.join("summary.json").exists());
}

#[test]
fn multi_response_trail_fails_flow_balance_audit() {
    let dir = tempdir("audit");
    let run = bin()
        .args([
            "run",
            "--scenario",
            "fig2",
            "--pit-mode",
            "multi-response",
            "--out",
        ])
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(run.status.code(), Some(0));
    let audit = bin()
        .args(["audit", "--check", "flow-balance", "--trail"])
        .arg(dir.join("trail.jsonl"))
        .output()
        .unwrap();
    assert_eq!(audit.status.code(), Some(2));

    // the standard-mode trail passes the same check
    let run = bin()
        .args([
            "run",
            "--scenario",
            "fig2",
            "--pit-mode",
            "standard",
            "--out",
        ])
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(run.status.code(), Some(0));
    let audit = bin()
        .args(["audit", "--check", "flow-balance", "--trail"])
        .arg(dir.join("trail.jsonl"))
        .output()
        .unwrap();
    assert_eq!(audit.status.code(), Some(0));
}

#[test]
fn jsonl_format_writes_parseable_lines() {
    let dir = tempdir("jsonl");
    let out = bin()
        .args(["run", "--scenario", "fig2", "--format", "jsonl", "--out"])
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let body = std::fs::read_to_string(dir.join("metrics.jsonl")).unwrap();
    assert!(body.lines().count() >= 2);
    for line in body.lines() {
        assert!(line.starts_with('{') && line.ends_with('}'), "{line}");
    }
}

#[test]
fn invalid_scenario_file_exits_one() {
    let dir = tempdir("bad");
    let path = dir.join("bad.toml");
    std::fs::write(&path, "name = \"bad\"\nduration_us = 1\nbogus = true\n").unwrap();
    let out = bin()
        .args(["run", "--scenario"])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

#[test]
fn unknown_scenario_name_exits_one() {
    let out = bin()
        .args(["run", "--scenario", "no-such-scenario"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn seed_env_var_is_the_default() {
    let dir_a = tempdir("env-a");
    let dir_b = tempdir("env-b");
    let a = bin()
        .env("NDNTP_SIM_SEED", "7")
        .args(["run", "--scenario", "fig2", "--out"])
        .arg(&dir_a)
        .output()
        .unwrap();
    assert_eq!(a.status.code(), Some(0));
    let b = bin()
        .args(["run", "--scenario", "fig2", "--seed", "7", "--out"])
        .arg(&dir_b)
        .output()
        .unwrap();
    assert_eq!(b.status.code(), Some(0));
    let ta = std::fs::read_to_string(dir_a.join("trail.jsonl")).unwrap();
    let tb = std::fs::read_to_string(dir_b.join("trail.jsonl")).unwrap();
    assert_eq!(ta, tb);
}

#[test]
fn sweep_merges_seeds_in_order() {
    let dir = tempdir("sweep");
    let out = bin()
        .args(["sweep", "--scenario", "fig2", "--seeds", "1..3", "--out"])
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let metrics = std::fs::read_to_string(dir.join("metrics.csv")).unwrap();
    let ids: Vec<&str> = metrics
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert!(ids.contains(&"fig2:1") && ids.contains(&"fig2:2") && ids.contains(&"fig2:3"));
    let summaries = std::fs::read_to_string(dir.join("summaries.jsonl")).unwrap();
    assert_eq!(summaries.lines().count(), 3);
}

#[test]
fn usage_error_is_nonzero() {
    let out = bin().args(["run"]).output().unwrap();
    assert_ne!(out.status.code(), Some(0));
    assert!(!out.stderr.is_empty());
}
