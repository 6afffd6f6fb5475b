//! CLI surface: exit codes, help, and file outputs per subcommand.

mod common;

use common::fixture;
use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_edg-typer"))
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = bin().args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn help_exits_zero_for_every_subcommand() {
    for sub in ["infer", "graph", "prepare-baseline", "check", "evaluate", "typecheck"] {
        let (code, stdout, stderr) = run(&[sub, "--help"]);
        assert_eq!(code, 0, "{sub} --help failed: {stderr}");
        let help = format!("{stdout}{stderr}");
        assert!(help.contains("Usage"), "{sub} help missing usage");
    }
    let (code, ..) = run(&["--help"]);
    assert_eq!(code, 0);
}

#[test]
fn missing_repo_is_usage_error() {
    let (code, _, _) = run(&["infer"]);
    assert_eq!(code, 2);
    let (code, _, _) = run(&["infer", "--oracle", "banana", "--repo", "x"]);
    assert_eq!(code, 2);
}

#[test]
fn infer_fixture_exits_zero_and_output_rechecks() {
    let out_dir = tempfile::tempdir().unwrap();
    let report = out_dir.path().join("report.json");
    let (code, stdout, stderr) = run(&[
        "infer",
        "--repo",
        fixture("flask_mini").to_str().unwrap(),
        "--oracle",
        "rule",
        "--out",
        out_dir.path().join("annotated").to_str().unwrap(),
        "--report",
        report.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "stdout: {stdout} stderr: {stderr}");
    assert!(report.exists());
    assert!(report.with_extension("progress.csv").exists());

    let (code, _, _) = run(&[
        "typecheck",
        out_dir.path().join("annotated").to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
}

#[test]
fn http_oracle_unreachable_is_environment_error() {
    let out_dir = tempfile::tempdir().unwrap();
    let (code, _, stderr) = bin()
        .args([
            "infer",
            "--repo",
            fixture("chain_calc").to_str().unwrap(),
            "--oracle",
            "http",
            "--out",
            out_dir.path().join("x").to_str().unwrap(),
        ])
        .env("EDG_ORACLE_URL", "http://127.0.0.1:9/oracle")
        .output()
        .map(|o| {
            (
                o.status.code().unwrap_or(-1),
                String::from_utf8_lossy(&o.stdout).into_owned(),
                String::from_utf8_lossy(&o.stderr).into_owned(),
            )
        })
        .unwrap();
    assert_eq!(code, 3, "{stderr}");
}

#[test]
fn graph_json_counts_fixture_nodes() {
    let (code, stdout, _) = run(&[
        "graph",
        "--repo",
        fixture("conflicts/arg_type").to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    // Two function entities: scale and use.
    assert_eq!(v["nodes"].as_array().unwrap().len(), 2);
    assert!(v["edges"].as_array().unwrap().iter().any(|e| e["kind"] == "Call"));
}

#[test]
fn graph_dot_format() {
    let (code, stdout, _) = run(&[
        "graph",
        "--repo",
        fixture("conflicts/arg_type").to_str().unwrap(),
        "--format",
        "dot",
    ]);
    assert_eq!(code, 0);
    assert!(stdout.contains("digraph edg"));
    assert!(stdout.contains("\"m.use\" -> \"m.scale\""));
}

#[test]
fn prepare_baseline_is_idempotent_through_cli() {
    let work = tempfile::tempdir().unwrap();
    copy_tree(&fixture("baseline_errors"), work.path());
    let (code, _, stderr) = run(&[
        "prepare-baseline",
        "--repo",
        work.path().to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{stderr}");
    let first = read_tree(work.path());

    let (code, _, _) = run(&["prepare-baseline", "--repo", work.path().to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(first, read_tree(work.path()));

    let (code, _, _) = run(&["check", "--repo", work.path().to_str().unwrap()]);
    assert_eq!(code, 0);
}

#[test]
fn check_reports_diagnostics_per_configured_set() {
    let (code, stdout, _) = run(&[
        "check",
        "--repo",
        fixture("baseline_errors").to_str().unwrap(),
    ]);
    assert_eq!(code, 1);
    assert!(stdout.contains("[operator]"));
    assert!(stdout.contains("[name-defined]"));
}

#[test]
fn evaluate_self_prints_perfect_scores() {
    let (code, stdout, _) = run(&[
        "evaluate",
        "--pred",
        fixture("textkit").to_str().unwrap(),
        "--truth",
        fixture("textkit").to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert!(stdout.contains("TypeSim 1.00 / TypeExact 1.00"), "{stdout}");
}

#[test]
fn typecheck_flags_accepted_for_mypy_compatibility() {
    let (code, _, _) = run(&[
        "typecheck",
        "--no-error-summary",
        "--show-error-codes",
        fixture("flask_mini").to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
}

fn copy_tree(from: &Path, to: &Path) {
    for entry in walk(from) {
        let rel = entry.strip_prefix(from).unwrap();
        let target = to.join(rel);
        std::fs::create_dir_all(target.parent().unwrap()).unwrap();
        std::fs::copy(&entry, &target).unwrap();
    }
}

fn read_tree(root: &Path) -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = walk(root)
        .into_iter()
        .map(|p| {
            (
                p.strip_prefix(root).unwrap().display().to_string(),
                std::fs::read_to_string(&p).unwrap(),
            )
        })
        .collect();
    out.sort();
    out
}

fn walk(root: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push(path);
            }
        }
    }
    out
}
