//! Watch the backtracking repair loop fix a bad annotation.
//!
//! An adversarial oracle types `scale`'s parameter as `str` on its first
//! attempt; the checker flags the call site, attribution blames the
//! parameter, the annotation is invalidated and re-inferred with the
//! conflict context, and the second attempt validates.
//!
//! ```sh
//! cargo build --bin edg-typer && cargo run --example repair_conflict
//! ```

use edg_typer::config::RunConfig;
use edg_typer::driver::run_pipeline;
use edg_typer::frontend::load_repo;
use edg_typer::inference::{
    InferenceError, Oracle, OracleRequest, OracleResponse, OracleTask, RuleOracle,
};
use edg_typer::validation::CheckerConfig;
use std::cell::Cell;
use std::path::PathBuf;

struct AdversarialOracle {
    poisoned_once: Cell<bool>,
}

impl Oracle for AdversarialOracle {
    fn respond(&self, request: &OracleRequest) -> Result<OracleResponse, InferenceError> {
        let response = RuleOracle.respond(request)?;
        let OracleResponse::Annotations(mut anns) = response else {
            return Ok(response);
        };
        if request.task == OracleTask::InferTypes && !self.poisoned_once.get() {
            for a in &mut anns {
                if a.slot.contains("scale#") {
                    a.type_expr = "str".to_string();
                    self.poisoned_once.set(true);
                }
            }
        }
        Ok(OracleResponse::Annotations(anns))
    }

    fn name(&self) -> &str {
        "adversarial"
    }
}

fn main() {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/conflicts/arg_type");
    let checker_bin = std::env::current_exe()
        .ok()
        .and_then(|p| p.parent().and_then(|p| p.parent()).map(|p| p.join("edg-typer")))
        .filter(|p| p.exists())
        .expect("build the edg-typer binary first: cargo build --bin edg-typer");

    let config = RunConfig {
        checker: CheckerConfig::bundled_at(checker_bin),
        ..Default::default()
    };
    let oracle = AdversarialOracle {
        poisoned_once: Cell::new(false),
    };

    let repo = load_repo(&root).expect("fixture loads");
    let (annotated, report) = run_pipeline(repo, &config, &oracle).expect("pipeline runs");

    for trace in &report.trace {
        for c in &trace.conflicts {
            println!("conflict:   {c}");
        }
        for r in &trace.resolutions {
            println!("resolution: {r}");
        }
    }
    println!("conflict-free: {}", report.conflict_free());
    println!("--- final m.py ---");
    print!("{}", annotated.file_text("m.py").unwrap());
}
