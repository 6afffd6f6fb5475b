use super::{FrontendError, SourceFile, SourceRepo};
use std::path::Path;
use walkdir::WalkDir;

/// Load every `.py` file under `root` into a [`SourceRepo`].
///
/// Paths are stored relative to `root` with `/` separators and the file
/// list is sorted lexicographically, making the load order deterministic.
pub fn load_repo(root: &Path) -> Result<SourceRepo, FrontendError> {
    let root = root
        .canonicalize()
        .map_err(|e| FrontendError::Io {
            path: root.to_path_buf(),
            source: e,
        })?;

    let mut files = Vec::new();
    for entry in WalkDir::new(&root).sort_by_file_name() {
        let entry = entry.map_err(|e| FrontendError::Io {
            path: root.clone(),
            source: e.into(),
        })?;
        if !entry.file_type().is_file() {
            continue;
        }
        if entry.path().extension().and_then(|e| e.to_str()) != Some("py") {
            continue;
        }
        let bytes = std::fs::read(entry.path()).map_err(|e| FrontendError::Io {
            path: entry.path().to_path_buf(),
            source: e,
        })?;
        let text = String::from_utf8(bytes).map_err(|_| FrontendError::Encoding {
            path: entry.path().to_path_buf(),
        })?;
        let rel = entry
            .path()
            .strip_prefix(&root)
            .expect("walkdir yields paths under root")
            .components()
            .map(|c| c.as_os_str().to_string_lossy().into_owned())
            .collect::<Vec<_>>()
            .join("/");
        files.push(SourceFile { path: rel, text });
    }

    if files.is_empty() {
        return Err(FrontendError::NoPythonFiles { root });
    }
    files.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(SourceRepo { root, files })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loads_sorted_and_relative() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("b.py"), "x = 1\n").unwrap();
        std::fs::write(dir.path().join("a.py"), "y = 2\n").unwrap();
        std::fs::create_dir(dir.path().join("pkg")).unwrap();
        std::fs::write(dir.path().join("pkg/c.py"), "z = 3\n").unwrap();
        std::fs::write(dir.path().join("notes.txt"), "skip me").unwrap();

        let repo = load_repo(dir.path()).unwrap();
        let paths: Vec<&str> = repo.files.iter().map(|f| f.path.as_str()).collect();
        assert_eq!(paths, vec!["a.py", "b.py", "pkg/c.py"]);
    }

    #[test]
    fn empty_dir_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_repo(dir.path()),
            Err(FrontendError::NoPythonFiles { .. })
        ));
    }

    #[test]
    fn non_utf8_is_reported_with_path() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("bad.py"), [0xff, 0xfe, 0x00]).unwrap();
        match load_repo(dir.path()) {
            Err(FrontendError::Encoding { path }) => {
                assert!(path.ends_with("bad.py"));
            }
            other => panic!("expected encoding error, got {other:?}"),
        }
    }
}
