//! End-to-end checks of the `fame` binary: exit codes, report output,
//! persistent cache behavior and config-file precedence.

use std::path::Path;
use std::process::{Command, Output};

fn fame(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fame"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).to_string()
}

fn code(output: &Output) -> i32 {
    output.status.code().expect("exit code")
}

#[test]
fn successful_run_exits_zero_with_three_rows() {
    let out = fame(&[
        "run",
        "--app",
        "research-summary",
        "--input",
        "p1",
        "--config",
        "M+C",
    ]);
    assert_eq!(code(&out), 0);
    let csv = stdout(&out);
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("app,input,query,config,status"));
    assert_eq!(lines.count(), 3);
    assert_eq!(csv.matches(",success,").count(), 3);
}

#[test]
fn empty_config_run_exits_two() {
    let out = fame(&[
        "run",
        "--app",
        "research-summary",
        "--input",
        "p1",
        "--config",
        "E",
    ]);
    assert_eq!(code(&out), 2);
    let csv = stdout(&out);
    assert_eq!(csv.matches(",dnf,").count(), 2);
}

#[test]
fn unknown_config_label_exits_one() {
    let out = fame(&["run", "--app", "research-summary", "--input", "p1", "--config", "Z"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn unknown_input_exits_one() {
    let out = fame(&["run", "--app", "log-analytics", "--input", "nope", "--config", "N"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn mock_runs_are_reproducible() {
    let args = ["run", "--app", "log-analytics", "--input", "apache", "--config", "M"];
    let a = fame(&args);
    let b = fame(&args);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn matrix_emits_raw_and_aggregated_rows() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw.csv");
    let mean = dir.path().join("mean.csv");
    let out = fame(&[
        "matrix",
        "--apps",
        "log-analytics",
        "--inputs",
        "openssh",
        "--configs",
        "N,M",
        "--repeats",
        "2",
        "--out",
        raw.to_str().unwrap(),
        "--aggregate",
        mean.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let raw_rows = std::fs::read_to_string(&raw).unwrap().lines().count() - 1;
    let mean_rows = std::fs::read_to_string(&mean).unwrap().lines().count() - 1;
    // 1 input x 2 configs x 3 queries, twice for raw, once aggregated.
    assert_eq!(raw_rows, 12);
    assert_eq!(mean_rows, 6);
}

fn q1_cache_hits(report: &Path) -> u64 {
    let text = std::fs::read_to_string(report).unwrap();
    let row = text.lines().nth(1).expect("Q1 row");
    let fields: Vec<&str> = row.split(',').collect();
    // cache_hits is the 15th column.
    fields[14].parse().unwrap()
}

#[test]
fn cache_root_persists_across_runs_until_cleared() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache");
    let report = dir.path().join("report.csv");
    let run = |report: &Path| {
        fame(&[
            "run",
            "--app",
            "research-summary",
            "--input",
            "p2",
            "--config",
            "C",
            "--cache-root",
            cache.to_str().unwrap(),
            "--report",
            report.to_str().unwrap(),
        ])
    };
    assert_eq!(code(&run(&report)), 0);
    assert_eq!(q1_cache_hits(&report), 0);
    // Second process finds the first one's entries on disk.
    assert_eq!(code(&run(&report)), 0);
    assert!(q1_cache_hits(&report) > 0);
    let cleared = fame(&["cache", "clear", "--cache-root", cache.to_str().unwrap()]);
    assert_eq!(code(&cleared), 0);
    assert_eq!(code(&run(&report)), 0);
    assert_eq!(q1_cache_hits(&report), 0);
}

#[test]
fn memory_show_unknown_session_is_empty_success() {
    let dir = tempfile::tempdir().unwrap();
    let out = fame(&[
        "memory",
        "show",
        "--session",
        "missing",
        "--memory-root",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).is_empty());
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    std::fs::write(
        &path,
        "app = \"research-summary\"\ninput = \"p1\"\nconfig = \"M\"\n",
    )
    .unwrap();
    let from_file = fame(&["run", "--config-file", path.to_str().unwrap()]);
    assert_eq!(code(&from_file), 0);
    let flag_wins = fame(&[
        "run",
        "--config-file",
        path.to_str().unwrap(),
        "--config",
        "E",
    ]);
    assert_eq!(code(&flag_wins), 2);
}
