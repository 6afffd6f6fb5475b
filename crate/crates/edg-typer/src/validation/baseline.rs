use super::checker::{run_checker, CheckerConfig};
use super::ValidationError;
use crate::frontend::{strip_annotations, SourceRepo};

const MAX_PASSES: usize = 10;

/// Produce the unannotated, checker-clean baseline: strip all
/// annotations, then suppress every remaining diagnostic with a trailing
/// `# type: ignore` comment until the checker reports nothing.
///
/// Already-suppressed lines are never commented twice, so re-running on a
/// prepared baseline is a no-op.
pub fn prepare_baseline(
    repo: &SourceRepo,
    checker: &CheckerConfig,
) -> Result<SourceRepo, ValidationError> {
    let (mut current, _archive) =
        strip_annotations(repo).map_err(|e| ValidationError::WorkingCopy(e.to_string()))?;

    for _pass in 0..MAX_PASSES {
        let dir = tempfile::tempdir().map_err(ValidationError::Workspace)?;
        current
            .write_to_dir(dir.path())
            .map_err(|e| ValidationError::WorkingCopy(e.to_string()))?;
        let diags = run_checker(dir.path(), checker)?;
        if diags.is_empty() {
            return Ok(current);
        }
        let mut changed = false;
        for d in &diags {
            if let Some(file) = current.files.iter_mut().find(|f| f.path == d.file) {
                if suppress_line(&mut file.text, d.line) {
                    changed = true;
                }
            }
        }
        if !changed {
            return Err(ValidationError::NonConverging {
                passes: MAX_PASSES,
                remaining: diags.len(),
            });
        }
    }

    // Final verification pass.
    let dir = tempfile::tempdir().map_err(ValidationError::Workspace)?;
    current
        .write_to_dir(dir.path())
        .map_err(|e| ValidationError::WorkingCopy(e.to_string()))?;
    let remaining = run_checker(dir.path(), checker)?;
    if remaining.is_empty() {
        Ok(current)
    } else {
        Err(ValidationError::NonConverging {
            passes: MAX_PASSES,
            remaining: remaining.len(),
        })
    }
}

/// Append `  # type: ignore` to the 1-based line unless it already
/// carries the marker. Returns whether the text changed.
fn suppress_line(text: &mut String, line: u32) -> bool {
    let mut offset = 0usize;
    for (current, l) in (1u32..).zip(text.split_inclusive('\n')) {
        if current == line {
            if l.contains("# type: ignore") {
                return false;
            }
            let insert_at = offset + l.trim_end_matches(['\n', '\r']).len();
            text.insert_str(insert_at, "  # type: ignore");
            return true;
        }
        offset += l.len();
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suppression_appends_once() {
        let mut text = "x = 1 + 'a'\ny = 2\n".to_string();
        assert!(suppress_line(&mut text, 1));
        assert_eq!(text, "x = 1 + 'a'  # type: ignore\ny = 2\n");
        assert!(!suppress_line(&mut text, 1));
    }
}
