use super::ValidationError;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::Command;

/// Error codes ignored during iterative refinement: categories that stem
/// from incomplete annotations rather than semantic defects, plus
/// missing-import noise from third-party dependencies.
pub fn refinement_ignored_codes() -> BTreeSet<String> {
    [
        "var-annotated",
        "assignment",
        "has-type",
        "import",
        "import-not-found",
        "import-untyped",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

/// How to invoke the external checker. The adapter is the only component
/// aware of the concrete checker; anything that speaks the
/// `path:line: error: message  [code]` line protocol works.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckerConfig {
    /// Checker executable.
    pub path: PathBuf,
    /// Arguments placed before the pinned flags (e.g. a subcommand).
    pub args_prefix: Vec<String>,
    pub extra_flags: Vec<String>,
    pub ignored_codes: BTreeSet<String>,
}

impl CheckerConfig {
    /// The bundled reference checker, reached through this binary's
    /// `typecheck` subcommand.
    pub fn bundled() -> Self {
        let path = std::env::current_exe().unwrap_or_else(|_| PathBuf::from("edg-typer"));
        Self::bundled_at(path)
    }

    pub fn bundled_at(path: impl Into<PathBuf>) -> Self {
        CheckerConfig {
            path: path.into(),
            args_prefix: vec!["typecheck".to_string()],
            extra_flags: vec![],
            ignored_codes: refinement_ignored_codes(),
        }
    }

    /// A mypy-compatible binary invoked directly.
    pub fn external(path: impl Into<PathBuf>) -> Self {
        CheckerConfig {
            path: path.into(),
            args_prefix: vec![],
            extra_flags: vec![],
            ignored_codes: refinement_ignored_codes(),
        }
    }

    pub fn without_ignored_codes(mut self) -> Self {
        self.ignored_codes.clear();
        self
    }
}

/// One checker diagnostic in normalized form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    /// Path relative to the checked root, `/`-separated.
    pub file: String,
    pub line: u32,
    pub error_code: String,
    pub message: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}:{}: error: {}  [{}]",
            self.file, self.line, self.message, self.error_code
        )
    }
}

/// Run the configured checker on `root` and parse its diagnostics,
/// filtering out the configured ignored codes.
///
/// argv is `[checker, args_prefix.., --no-error-summary,
/// --show-error-codes, extra_flags.., root]`; exit codes 0 and 1 are both
/// valid checker outcomes.
pub fn run_checker(root: &Path, cfg: &CheckerConfig) -> Result<Vec<Diagnostic>, ValidationError> {
    let mut cmd = Command::new(&cfg.path);
    cmd.args(&cfg.args_prefix)
        .arg("--no-error-summary")
        .arg("--show-error-codes")
        .args(&cfg.extra_flags)
        .arg(root);
    let output = cmd.output().map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            ValidationError::CheckerMissing(cfg.path.display().to_string())
        } else {
            ValidationError::CheckerCrashed {
                code: None,
                stderr: e.to_string(),
            }
        }
    })?;

    let stdout = String::from_utf8_lossy(&output.stdout);
    let diags = parse_diagnostics(&stdout, root);
    let exit_ok = matches!(output.status.code(), Some(0) | Some(1));
    if !exit_ok && diags.is_empty() {
        return Err(ValidationError::CheckerCrashed {
            code: output.status.code(),
            stderr: String::from_utf8_lossy(&output.stderr).into_owned(),
        });
    }
    Ok(diags
        .into_iter()
        .filter(|d| !cfg.ignored_codes.contains(&d.error_code))
        .collect())
}

/// Parse `path:line: error: message  [code]` lines (column numbers are
/// tolerated; notes and warnings are skipped).
pub fn parse_diagnostics(output: &str, root: &Path) -> Vec<Diagnostic> {
    let root_prefix = format!("{}/", root.display());
    let mut out = Vec::new();
    for line in output.lines() {
        let Some(d) = parse_line(line, &root_prefix) else {
            continue;
        };
        out.push(d);
    }
    out
}

fn parse_line(line: &str, root_prefix: &str) -> Option<Diagnostic> {
    let marker = ": error: ";
    let pos = line.find(marker)?;
    let location = &line[..pos];
    let rest = &line[pos + marker.len()..];

    // location is path:line or path:line:col
    let mut parts = location.rsplitn(3, ':');
    let first = parts.next()?;
    let second = parts.next()?;
    let (path, line_no) = match (first.parse::<u32>(), second.parse::<u32>()) {
        (Ok(_col), Ok(l)) => (parts.next()?, l),
        (Ok(l), Err(_)) => {
            let mut path = second.to_string();
            if let Some(prefix) = parts.next() {
                path = format!("{prefix}:{path}");
            }
            return finish(path, l, rest, root_prefix);
        }
        _ => return None,
    };
    finish(path.to_string(), line_no, rest, root_prefix)
}

fn finish(path: String, line: u32, rest: &str, root_prefix: &str) -> Option<Diagnostic> {
    let (message, code) = match rest.rfind("  [") {
        Some(i) if rest.ends_with(']') => {
            (rest[..i].to_string(), rest[i + 3..rest.len() - 1].to_string())
        }
        _ => (rest.trim_end().to_string(), "misc".to_string()),
    };
    let file = path
        .strip_prefix(root_prefix)
        .unwrap_or(&path)
        .replace('\\', "/");
    Some(Diagnostic {
        file,
        line,
        error_code: code,
        message,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_mypy_lines() {
        let root = Path::new("/tmp/work");
        let out = "app/x.py:12: error: Argument 1 to \"f\" has incompatible type \"str\"; expected \"int\"  [arg-type]\napp/x.py:13: note: some note\n";
        let diags = parse_diagnostics(out, root);
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].file, "app/x.py");
        assert_eq!(diags[0].line, 12);
        assert_eq!(diags[0].error_code, "arg-type");
    }

    #[test]
    fn parses_column_form_and_absolute_path() {
        let root = Path::new("/tmp/work");
        let out = "/tmp/work/m.py:3:10: error: Name \"Bogus\" is not defined  [name-defined]\n";
        let diags = parse_diagnostics(out, root);
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].file, "m.py");
        assert_eq!(diags[0].line, 3);
        assert_eq!(diags[0].error_code, "name-defined");
    }

    #[test]
    fn ignored_codes_filtered() {
        let cfg = CheckerConfig::bundled_at("/nonexistent");
        assert!(cfg.ignored_codes.contains("assignment"));
        let root = Path::new("/r");
        let out = "m.py:1: error: Incompatible types in assignment (expression has type \"str\", variable has type \"int\")  [assignment]\n";
        let diags: Vec<_> = parse_diagnostics(out, root)
            .into_iter()
            .filter(|d| !cfg.ignored_codes.contains(&d.error_code))
            .collect();
        assert!(diags.is_empty());
    }

    #[test]
    fn missing_checker_reported() {
        let cfg = CheckerConfig::external("/definitely/not/here/mypy");
        let err = run_checker(Path::new("/tmp"), &cfg).unwrap_err();
        assert!(matches!(err, ValidationError::CheckerMissing(_)));
    }
}
