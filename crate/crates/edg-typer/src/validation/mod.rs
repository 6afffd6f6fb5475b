//! Type-checker integration: run the external checker, attribute its
//! diagnostics to freshly applied annotations, and repair conflicts via
//! backtracking, falling back to `Any` when a conflict persists.

mod baseline;
mod checker;
mod conflict;

pub use baseline::prepare_baseline;
pub use checker::{parse_diagnostics, run_checker, CheckerConfig, Diagnostic};
pub use conflict::{
    attribute_conflicts, resolve_conflict, AppliedSlot, ConflictCategory, ConflictReport,
    Resolution, ResolveState,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ValidationError {
    #[error("checker executable not found: {0}")]
    CheckerMissing(String),
    #[error("checker crashed (exit {code:?}): {stderr}")]
    CheckerCrashed { code: Option<i32>, stderr: String },
    #[error("failed to create working directory: {0}")]
    Workspace(std::io::Error),
    #[error("failed to materialize working copy: {0}")]
    WorkingCopy(String),
    #[error(
        "baseline preparation did not converge after {passes} passes ({remaining} diagnostics left)"
    )]
    NonConverging { passes: usize, remaining: usize },
}
