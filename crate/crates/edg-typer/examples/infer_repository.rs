//! Run the full inference pipeline on a fixture repo with the rule
//! oracle and the bundled checker, then print the run report.
//!
//! Needs the `edg-typer` binary for the checker subprocess:
//!
//! ```sh
//! cargo build --bin edg-typer && cargo run --example infer_repository
//! ```

use edg_typer::config::RunConfig;
use edg_typer::driver::run_pipeline;
use edg_typer::frontend::load_repo;
use edg_typer::inference::RuleOracle;
use edg_typer::validation::CheckerConfig;
use std::path::PathBuf;

fn main() {
    let root = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| {
            PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/flask_mini")
        });

    // Examples live in target/<profile>/examples/, the CLI one level up.
    let checker_bin = std::env::current_exe()
        .ok()
        .and_then(|p| p.parent().and_then(|p| p.parent()).map(|p| p.join("edg-typer")))
        .filter(|p| p.exists())
        .expect("build the edg-typer binary first: cargo build --bin edg-typer");

    let config = RunConfig {
        checker: CheckerConfig::bundled_at(checker_bin),
        ..Default::default()
    };

    let repo = load_repo(&root).expect("repository loads");
    let (annotated, report) = run_pipeline(repo, &config, &RuleOracle).expect("pipeline runs");

    println!(
        "iterations: {}  coverage: {:.0}%  fallbacks: {}  conflict-free: {}",
        report.iterations,
        report.coverage * 100.0,
        report.fallback_count(),
        report.conflict_free()
    );
    for trace in &report.trace {
        println!(
            "  iter {}: selected {:?}, probed +{}, annotated {}",
            trace.iteration,
            trace.selected_clusters,
            trace.probed_edges_accepted,
            trace.slots_annotated.len()
        );
    }
    println!("--- annotated app/helpers.py ---");
    if let Some(text) = annotated.file_text("app/helpers.py") {
        print!("{text}");
    }
}
