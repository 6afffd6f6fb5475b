//! Bundled reference type checker.
//!
//! A deliberately small, deterministic checker that emits mypy-format
//! diagnostics (`path:line: error: message  [code]`) for the error
//! categories the pipeline tracks: arg-type, call-arg, return-value,
//! assignment, override, attr-defined, name-defined, operator,
//! var-annotated. Unannotated code is dynamic: calls to functions without
//! any annotation are not checked, so a freshly stripped repository is
//! quiet except for annotation-independent defects.
//!
//! It is reached through the `typecheck` subcommand of the main binary
//! and speaks the same subprocess protocol as mypy, which keeps the
//! validation pipeline hermetic when no external checker is installed.

mod builtins;
mod check;
mod symbols;

pub use check::check_repo;

use crate::frontend::{load_repo, SourceRepo};
use std::path::Path;

/// One checker finding, displayed in mypy's line format.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Finding {
    pub file: String,
    pub line: u32,
    pub code: String,
    pub message: String,
}

impl std::fmt::Display for Finding {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}:{}: error: {}  [{}]",
            self.file, self.line, self.message, self.code
        )
    }
}

/// Check every `.py` file under `root`. IO failures surface as `Err`
/// (the CLI maps them to exit code 2, like a crashed checker).
pub fn check_path(root: &Path) -> Result<Vec<Finding>, String> {
    let repo: SourceRepo = load_repo(root).map_err(|e| e.to_string())?;
    Ok(check_repo(&repo))
}
