use super::state::{PipelineState, STATE_SCHEMA_VERSION};
use super::DriverError;
use std::path::Path;

/// Persist the pipeline state as versioned JSON; `checkpoint_load`
/// restores an observationally identical state.
pub fn checkpoint_save(state: &PipelineState, path: &Path) -> Result<(), DriverError> {
    let json = serde_json::to_string_pretty(state)
        .map_err(|e| DriverError::CorruptCheckpoint(e.to_string()))?;
    std::fs::write(path, json).map_err(|e| DriverError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

pub fn checkpoint_load(path: &Path) -> Result<PipelineState, DriverError> {
    let text = std::fs::read_to_string(path).map_err(|e| DriverError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let state: PipelineState = serde_json::from_str(&text)
        .map_err(|e| DriverError::CorruptCheckpoint(e.to_string()))?;
    if state.schema_version != STATE_SCHEMA_VERSION {
        return Err(DriverError::CorruptCheckpoint(format!(
            "schema version {} (expected {})",
            state.schema_version, STATE_SCHEMA_VERSION
        )));
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::SourceRepo;

    #[test]
    fn round_trip_preserves_state() {
        let repo = SourceRepo::from_files(vec![(
            "m.py".to_string(),
            "def f():\n    return 1\n".to_string(),
        )]);
        let (state, _) = PipelineState::new(repo);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.json");
        checkpoint_save(&state, &path).unwrap();
        let loaded = checkpoint_load(&path).unwrap();
        assert_eq!(
            serde_json::to_string(&state).unwrap(),
            serde_json::to_string(&loaded).unwrap()
        );
    }

    #[test]
    fn wrong_schema_version_rejected() {
        let repo = SourceRepo::from_files(vec![("m.py".to_string(), "x = 1\n".to_string())]);
        let (mut state, _) = PipelineState::new(repo);
        state.schema_version = 999;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.json");
        let json = serde_json::to_string(&state).unwrap();
        std::fs::write(&path, json).unwrap();
        assert!(matches!(
            checkpoint_load(&path),
            Err(DriverError::CorruptCheckpoint(_))
        ));
    }
}
