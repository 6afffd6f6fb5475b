//! Python source model: repository loading, entity extraction, reference
//! resolution, and span-based annotation rewriting.

mod entities;
mod repo;
mod resolve;
mod rewrite;

pub use entities::{extract_entities, params_with_meta, EntityIndex};
pub use repo::load_repo;
pub use resolve::{resolve_statement_refs, ModuleScopes, RefKind, StatementRef};
pub use rewrite::{
    apply_annotations, strip_annotations, AnnotationArchive, ArchiveEntry, IMPORT_BLOCK_MARKER,
};

use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FrontendError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} is not valid UTF-8")]
    Encoding { path: PathBuf },
    #[error("no Python files under {root}")]
    NoPythonFiles { root: PathBuf },
    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },
    #[error("unknown slot {0}")]
    UnknownSlot(String),
    #[error(transparent)]
    InvalidType(#[from] crate::types::TypeError),
}

/// A loaded Python repository: relative paths plus their UTF-8 text,
/// sorted lexicographically by path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceRepo {
    pub root: PathBuf,
    pub files: Vec<SourceFile>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceFile {
    /// Relative, `/`-separated, ends in `.py`.
    pub path: String,
    pub text: String,
}

impl SourceRepo {
    /// Build a repo directly from `(path, text)` pairs; paths are sorted.
    pub fn from_files(files: Vec<(String, String)>) -> Self {
        let mut files: Vec<SourceFile> = files
            .into_iter()
            .map(|(path, text)| SourceFile { path, text })
            .collect();
        files.sort_by(|a, b| a.path.cmp(&b.path));
        SourceRepo {
            root: PathBuf::new(),
            files,
        }
    }

    pub fn file(&self, path: &str) -> Option<&SourceFile> {
        self.files.iter().find(|f| f.path == path)
    }

    pub fn file_text(&self, path: &str) -> Option<&str> {
        self.file(path).map(|f| f.text.as_str())
    }

    /// Dotted module path for a repo-relative file path.
    pub fn module_path(path: &str) -> String {
        let trimmed = path.strip_suffix(".py").unwrap_or(path);
        let trimmed = trimmed
            .strip_suffix("/__init__")
            .or_else(|| (trimmed == "__init__").then_some(""))
            .unwrap_or(trimmed);
        trimmed.replace('/', ".")
    }

    /// Write all files under `dir`, creating directories as needed.
    pub fn write_to_dir(&self, dir: &std::path::Path) -> Result<(), FrontendError> {
        for f in &self.files {
            let target = dir.join(&f.path);
            if let Some(parent) = target.parent() {
                std::fs::create_dir_all(parent).map_err(|e| FrontendError::Io {
                    path: parent.to_path_buf(),
                    source: e,
                })?;
            }
            std::fs::write(&target, &f.text).map_err(|e| FrontendError::Io {
                path: target.clone(),
                source: e,
            })?;
        }
        Ok(())
    }
}

/// A contiguous region of one source file. Lines are 1-based, columns are
/// 0-based byte offsets within the line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeSpan {
    pub file: String,
    pub start_line: u32,
    pub start_col: u32,
    pub end_line: u32,
    pub end_col: u32,
}

impl CodeSpan {
    pub fn contains_line(&self, file: &str, line: u32) -> bool {
        self.file == file && self.start_line <= line && line <= self.end_line
    }
}

/// Byte-offset to line/column conversion for one file.
pub struct LineIndex {
    line_starts: Vec<usize>,
}

impl LineIndex {
    pub fn new(text: &str) -> Self {
        let mut line_starts = vec![0];
        for (i, b) in text.bytes().enumerate() {
            if b == b'\n' {
                line_starts.push(i + 1);
            }
        }
        LineIndex { line_starts }
    }

    /// (1-based line, 0-based byte column) for a byte offset.
    pub fn locate(&self, offset: usize) -> (u32, u32) {
        let line = match self.line_starts.binary_search(&offset) {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        (line as u32 + 1, (offset - self.line_starts[line]) as u32)
    }

    pub fn line_start(&self, line: u32) -> Option<usize> {
        self.line_starts.get(line as usize - 1).copied()
    }
}

/// Stable qualified name of an entity, e.g. `pkg.mod.Class.method`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(pub String);

impl EntityId {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Final dotted segment.
    pub fn basename(&self) -> &str {
        self.0.rsplit('.').next().unwrap_or(&self.0)
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for EntityId {
    fn from(s: &str) -> Self {
        EntityId(s.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EntityKind {
    Variable,
    Function,
    Class,
}

/// One annotatable position.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SlotRole {
    Var,
    Param(String),
    Return,
}

impl fmt::Display for SlotRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SlotRole::Var => f.write_str("var"),
            SlotRole::Param(name) => write!(f, "param({name})"),
            SlotRole::Return => f.write_str("return"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SlotId {
    pub entity: EntityId,
    pub role: SlotRole,
}

// Slot ids serialize as their `entity#role` text so they can key JSON maps.
impl Serialize for SlotId {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.text())
    }
}

impl<'de> Deserialize<'de> for SlotId {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        SlotId::parse(&s)
            .ok_or_else(|| serde::de::Error::custom(format!("invalid slot id `{s}`")))
    }
}

impl SlotId {
    pub fn var(entity: impl Into<EntityId>) -> Self {
        SlotId {
            entity: entity.into(),
            role: SlotRole::Var,
        }
    }

    pub fn param(entity: impl Into<EntityId>, name: &str) -> Self {
        SlotId {
            entity: entity.into(),
            role: SlotRole::Param(name.to_string()),
        }
    }

    pub fn ret(entity: impl Into<EntityId>) -> Self {
        SlotId {
            entity: entity.into(),
            role: SlotRole::Return,
        }
    }

    /// Textual form `entity_id#role`, the wire and archive key format.
    pub fn text(&self) -> String {
        format!("{}#{}", self.entity, self.role)
    }

    pub fn parse(s: &str) -> Option<SlotId> {
        let (entity, role) = s.rsplit_once('#')?;
        let role = match role {
            "var" => SlotRole::Var,
            "return" => SlotRole::Return,
            r => {
                let name = r.strip_prefix("param(")?.strip_suffix(')')?;
                SlotRole::Param(name.to_string())
            }
        };
        Some(SlotId {
            entity: EntityId(entity.to_string()),
            role,
        })
    }
}

impl fmt::Display for SlotId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.entity, self.role)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SlotState {
    Unannotated,
    Inferred,
    Validated,
    Fallback,
}

/// A slot together with its current annotation and lifecycle state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeSlot {
    pub id: SlotId,
    pub annotation: Option<String>,
    pub state: SlotState,
    pub attempts: u8,
}

impl TypeSlot {
    pub fn unannotated(id: SlotId) -> Self {
        TypeSlot {
            id,
            annotation: None,
            state: SlotState::Unannotated,
            attempts: 0,
        }
    }

    pub fn validated(id: SlotId, annotation: String) -> Self {
        TypeSlot {
            id,
            annotation: Some(annotation),
            state: SlotState::Validated,
            attempts: 0,
        }
    }

    pub fn is_annotated(&self) -> bool {
        !matches!(self.state, SlotState::Unannotated)
    }
}

/// A repository-visible object: module variable, class attribute,
/// function, method, or class.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Entity {
    pub id: EntityId,
    pub kind: EntityKind,
    pub defining_span: CodeSpan,
    pub definition_text: String,
    pub slots: Vec<TypeSlot>,
    pub enclosing_class: Option<EntityId>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn module_paths() {
        assert_eq!(SourceRepo::module_path("a/b.py"), "a.b");
        assert_eq!(SourceRepo::module_path("a/__init__.py"), "a");
        assert_eq!(SourceRepo::module_path("top.py"), "top");
    }

    #[test]
    fn slot_id_round_trip() {
        for id in [
            SlotId::var("m.x"),
            SlotId::param("m.f", "arg_one"),
            SlotId::ret("m.C.meth"),
        ] {
            assert_eq!(SlotId::parse(&id.text()), Some(id));
        }
    }

    #[test]
    fn line_index_locates() {
        let idx = LineIndex::new("ab\ncd\n");
        assert_eq!(idx.locate(0), (1, 0));
        assert_eq!(idx.locate(3), (2, 0));
        assert_eq!(idx.locate(4), (2, 1));
    }
}
