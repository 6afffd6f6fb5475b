//! Command-line surface: `infer`, `graph`, `prepare-baseline`, `check`,
//! `evaluate`, plus the bundled `typecheck` reference checker.
//!
//! Exit codes: 0 success, 1 completed with fallbacks (or diagnostics for
//! `check`/`typecheck`), 2 usage error, 3 environment error (checker or
//! oracle unavailable).

use crate::config::{OracleKind, RunConfig};
use crate::driver::{checkpoint_load, checkpoint_save, DriverError, PipelineState};
use crate::frontend::load_repo;
use crate::inference::{HttpOracle, InferenceError, Oracle, RuleOracle};
use crate::metrics::{count_introduced_errors, evaluate_repo_pair};
use crate::validation::{prepare_baseline, run_checker, CheckerConfig, ValidationError};
use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FALLBACKS: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_ENV: i32 = 3;

#[derive(Parser)]
#[command(
    name = "edg-typer",
    about = "Repository-level type inference for Python via entity dependency graphs",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Infer types for a repository and write the annotated copy.
    Infer(InferArgs),
    /// Export the entity dependency graph.
    Graph(GraphArgs),
    /// Strip annotations and suppress inherent checker errors.
    PrepareBaseline(BaselineArgs),
    /// Run the configured checker and print normalized diagnostics.
    Check(CheckArgs),
    /// Score a predicted repository against ground truth.
    Evaluate(EvaluateArgs),
    /// Bundled reference type checker (mypy-compatible line output).
    Typecheck(TypecheckArgs),
}

#[derive(Args)]
struct InferArgs {
    /// Repository to annotate.
    #[arg(long)]
    repo: PathBuf,
    /// Output directory for the annotated repository.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Oracle implementation.
    #[arg(long, value_parser = ["rule", "http"])]
    oracle: Option<String>,
    /// TOML config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Checkpoint file: resumed when present, updated between iterations.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Run report path (JSON; a progress CSV is written beside it).
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    max_iterations: Option<usize>,
    /// External checker executable (defaults to the bundled checker).
    #[arg(long)]
    checker_path: Option<PathBuf>,
}

#[derive(Args)]
struct GraphArgs {
    #[arg(long)]
    repo: PathBuf,
    #[arg(long, default_value = "dot", value_parser = ["dot", "json"])]
    format: String,
    /// Write here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BaselineArgs {
    #[arg(long)]
    repo: PathBuf,
    /// Output directory; the repo is rewritten in place when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    checker_path: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long)]
    repo: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    checker_path: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Predicted (annotated) repository.
    #[arg(long)]
    pred: PathBuf,
    /// Ground-truth repository.
    #[arg(long)]
    truth: PathBuf,
    /// Checker-clean baseline for introduced-error counting.
    #[arg(long)]
    baseline: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    checker_path: Option<PathBuf>,
}

#[derive(Args)]
struct TypecheckArgs {
    root: PathBuf,
    /// Accepted for mypy compatibility; output never has a summary.
    #[arg(long)]
    no_error_summary: bool,
    /// Accepted for mypy compatibility; codes are always shown.
    #[arg(long)]
    show_error_codes: bool,
    /// Accepted for mypy compatibility; imports never error.
    #[arg(long)]
    ignore_missing_imports: bool,
}

/// Entry point used by the binary.
pub fn run() -> i32 {
    run_with(std::env::args().collect())
}

pub fn run_with(args: Vec<String>) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests exit 0; real usage errors exit 2.
            let code = if e.exit_code() == 0 { 0 } else { EXIT_USAGE };
            let _ = e.print();
            return code;
        }
    };
    match cli.command {
        Command::Infer(args) => cmd_infer(args),
        Command::Graph(args) => cmd_graph(args),
        Command::PrepareBaseline(args) => cmd_prepare_baseline(args),
        Command::Check(args) => cmd_check(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Typecheck(args) => cmd_typecheck(args),
    }
}

fn load_config(
    path: Option<&Path>,
    checker_path: Option<&Path>,
    max_iterations: Option<usize>,
    oracle: Option<&str>,
) -> Result<RunConfig, i32> {
    let mut cfg = match path {
        Some(p) => RunConfig::load(p).map_err(|e| {
            eprintln!("error: {e}");
            EXIT_USAGE
        })?,
        None => {
            let mut c = RunConfig::default();
            c.apply_env();
            c
        }
    };
    if let Some(p) = checker_path {
        cfg.checker = CheckerConfig::external(p);
    }
    if let Some(m) = max_iterations {
        cfg.max_iterations = m;
    }
    match oracle {
        Some("rule") => cfg.oracle = OracleKind::Rule,
        Some("http") => cfg.oracle = OracleKind::Http,
        _ => {}
    }
    cfg.validate().map_err(|e| {
        eprintln!("error: {e}");
        EXIT_USAGE
    })?;
    Ok(cfg)
}

fn build_oracle(cfg: &RunConfig) -> Box<dyn Oracle> {
    match cfg.oracle {
        OracleKind::Rule => Box::new(RuleOracle),
        OracleKind::Http => Box::new(HttpOracle::new(cfg.oracle_http.clone())),
    }
}

fn driver_error_code(e: &DriverError) -> i32 {
    match e {
        DriverError::Inference(InferenceError::OracleUnavailable(_)) => EXIT_ENV,
        DriverError::Validation(
            ValidationError::CheckerMissing(_) | ValidationError::CheckerCrashed { .. },
        ) => EXIT_ENV,
        _ => EXIT_USAGE,
    }
}

fn cmd_infer(args: InferArgs) -> i32 {
    let cfg = match load_config(
        args.config.as_deref(),
        args.checker_path.as_deref(),
        args.max_iterations,
        args.oracle.as_deref(),
    ) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let oracle = build_oracle(&cfg);

    let repo = match load_repo(&args.repo) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };

    // Resume from the checkpoint when one is present on disk.
    let (state, index) = match &args.checkpoint {
        Some(path) if path.exists() => match checkpoint_load(path) {
            Ok(state) => {
                let index = state.rebuild_index();
                (state, index)
            }
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_USAGE;
            }
        },
        _ => PipelineState::new(repo),
    };

    let result = run_to_completion(state, &index, &cfg, oracle.as_ref(), args.checkpoint.as_deref());
    let (annotated, report) = match result {
        Ok(pair) => pair,
        Err(e) => {
            eprintln!("error: {e}");
            return driver_error_code(&e);
        }
    };

    let out = args.out.unwrap_or_else(|| {
        args.repo.with_file_name(format!(
            "{}_annotated",
            args.repo.file_name().and_then(|s| s.to_str()).unwrap_or("repo")
        ))
    });
    if let Err(e) = annotated.write_to_dir(&out) {
        eprintln!("error: {e}");
        return EXIT_USAGE;
    }

    if let Some(report_path) = &args.report {
        if write_report(report_path, &serde_json::to_string_pretty(&report).unwrap()).is_err() {
            return EXIT_USAGE;
        }
        let csv_path = report_path.with_extension("progress.csv");
        let _ = std::fs::write(csv_path, report.progress_csv());
    }

    println!(
        "annotated {} slots across {} iterations; fallbacks: {}; conflict-free: {}",
        report.total_slots,
        report.iterations,
        report.fallback_count(),
        report.conflict_free()
    );
    if report.fallback_count() == 0 {
        EXIT_OK
    } else {
        EXIT_FALLBACKS
    }
}

/// Iterate with per-iteration checkpointing.
fn run_to_completion(
    mut state: PipelineState,
    index: &crate::frontend::EntityIndex,
    cfg: &RunConfig,
    oracle: &dyn Oracle,
    checkpoint: Option<&Path>,
) -> Result<(crate::frontend::SourceRepo, crate::driver::RunReport), DriverError> {
    while !state.unannotated_slots().is_empty()
        && state.iteration < cfg.max_iterations
        && state.stall_counter < cfg.stall_limit
    {
        state = crate::driver::run_iteration(&state, index, oracle, cfg)?;
        if let Some(path) = checkpoint {
            checkpoint_save(&state, path)?;
        }
    }
    crate::driver::run_pipeline_from(state, index, cfg, oracle)
}

fn write_report(path: &Path, contents: &str) -> Result<(), ()> {
    if let Some(parent) = path.parent() {
        let _ = std::fs::create_dir_all(parent);
    }
    std::fs::write(path, contents).map_err(|e| {
        eprintln!("error: failed to write {}: {e}", path.display());
    })
}

fn cmd_graph(args: GraphArgs) -> i32 {
    let repo = match load_repo(&args.repo) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let index = crate::frontend::extract_entities(&repo);
    let refs = crate::frontend::resolve_statement_refs(&repo, &index);
    let graph = crate::edg::build_edg(&index, &refs);
    let rendered = match args.format.as_str() {
        "json" => serde_json::to_string_pretty(&crate::edg::to_json(&graph, &index)).unwrap(),
        _ => crate::edg::to_dot(&graph, &index),
    };
    match args.out {
        Some(path) => {
            if std::fs::write(&path, rendered).is_err() {
                eprintln!("error: failed to write {}", path.display());
                return EXIT_USAGE;
            }
        }
        None => println!("{rendered}"),
    }
    EXIT_OK
}

fn cmd_prepare_baseline(args: BaselineArgs) -> i32 {
    let cfg = match load_config(args.config.as_deref(), args.checker_path.as_deref(), None, None) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let repo = match load_repo(&args.repo) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let baseline = match prepare_baseline(&repo, &cfg.checker) {
        Ok(b) => b,
        Err(e) => {
            eprintln!("error: {e}");
            return match e {
                ValidationError::CheckerMissing(_) | ValidationError::CheckerCrashed { .. } => {
                    EXIT_ENV
                }
                _ => EXIT_USAGE,
            };
        }
    };
    let out = args.out.unwrap_or_else(|| args.repo.clone());
    if let Err(e) = baseline.write_to_dir(&out) {
        eprintln!("error: {e}");
        return EXIT_USAGE;
    }
    println!("baseline written to {}", out.display());
    EXIT_OK
}

fn cmd_check(args: CheckArgs) -> i32 {
    let cfg = match load_config(args.config.as_deref(), args.checker_path.as_deref(), None, None) {
        Ok(c) => c,
        Err(code) => return code,
    };
    match run_checker(&args.repo, &cfg.checker) {
        Ok(diags) => {
            for d in &diags {
                println!("{d}");
            }
            if diags.is_empty() {
                EXIT_OK
            } else {
                EXIT_FALLBACKS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ENV
        }
    }
}

fn cmd_evaluate(args: EvaluateArgs) -> i32 {
    let pred = match load_repo(&args.pred) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let truth = match load_repo(&args.truth) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let mut report = evaluate_repo_pair(&pred, &truth);

    if let Some(baseline_path) = &args.baseline {
        let cfg = match load_config(None, args.checker_path.as_deref(), None, None) {
            Ok(c) => c,
            Err(code) => return code,
        };
        let baseline = match load_repo(baseline_path) {
            Ok(r) => r,
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_USAGE;
            }
        };
        match count_introduced_errors(&baseline, &pred, &cfg.checker) {
            Ok(counts) => report.introduced_errors = counts,
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_ENV;
            }
        }
    }

    print!("{}", report.render_table());
    println!(
        "TypeSim {:.2} / TypeExact {:.2}",
        report.mean_type_sim, report.type_exact_rate
    );
    if let Some(path) = &args.report {
        if write_report(path, &serde_json::to_string_pretty(&report).unwrap()).is_err() {
            return EXIT_USAGE;
        }
        let _ = std::fs::write(path.with_extension("categories.csv"), report.category_csv());
    }
    EXIT_OK
}

fn cmd_typecheck(args: TypecheckArgs) -> i32 {
    match crate::pycheck::check_path(&args.root) {
        Ok(findings) => {
            for f in &findings {
                println!("{f}");
            }
            if findings.is_empty() {
                EXIT_OK
            } else {
                EXIT_FALLBACKS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}
