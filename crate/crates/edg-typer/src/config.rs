//! Run configuration: TOML file, programmatic defaults, and environment
//! overrides for oracle credentials.

use crate::inference::HttpOracleConfig;
use crate::validation::CheckerConfig;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleKind {
    Rule,
    Http,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub oracle: OracleKind,
    pub oracle_http: HttpOracleConfig,
    /// Maximum entities per cluster.
    pub cluster_bound: usize,
    /// Oracle attempts per slot before falling back to `Any`.
    pub attempt_bound: u8,
    pub max_iterations: usize,
    /// Consecutive no-progress iterations before the fallback flush.
    pub stall_limit: usize,
    /// Serialized-context budget in characters.
    pub token_budget: usize,
    pub checker: CheckerConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            oracle: OracleKind::Rule,
            oracle_http: HttpOracleConfig::default(),
            cluster_bound: 5,
            attempt_bound: 3,
            max_iterations: 100,
            stall_limit: 3,
            token_budget: crate::inference::DEFAULT_TOKEN_BUDGET,
            checker: CheckerConfig::bundled(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, value) in [
            ("cluster_bound", self.cluster_bound),
            ("attempt_bound", self.attempt_bound as usize),
            ("max_iterations", self.max_iterations),
            ("stall_limit", self.stall_limit),
            ("token_budget", self.token_budget),
        ] {
            if value < 1 {
                return Err(ConfigError::Invalid(format!("{name} must be >= 1")));
            }
        }
        if self.oracle == OracleKind::Http && self.oracle_http.url.is_empty() {
            return Err(ConfigError::Invalid(
                "oracle.kind = \"http\" requires oracle.url (or EDG_ORACLE_URL)".to_string(),
            ));
        }
        Ok(())
    }

    /// Load a TOML config file and fold in environment overrides.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.apply_env();
        Ok(cfg)
    }

    /// `EDG_ORACLE_URL` and `EDG_ORACLE_TOKEN` override the file values.
    pub fn apply_env(&mut self) {
        if let Ok(url) = std::env::var("EDG_ORACLE_URL") {
            if !url.is_empty() {
                self.oracle_http.url = url;
            }
        }
        if let Ok(token) = std::env::var("EDG_ORACLE_TOKEN") {
            if !token.is_empty() {
                self.oracle_http.token = Some(token);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn toml_round_trip() {
        let text = r#"
oracle = "rule"
cluster_bound = 4
max_iterations = 50

[checker]
path = "mypy"
args_prefix = []
extra_flags = ["--strict-optional"]
ignored_codes = ["assignment"]
"#;
        let cfg: RunConfig = toml::from_str(text).unwrap();
        assert_eq!(cfg.cluster_bound, 4);
        assert_eq!(cfg.max_iterations, 50);
        assert_eq!(cfg.checker.path.to_str(), Some("mypy"));
        assert!(cfg.checker.ignored_codes.contains("assignment"));
        cfg.validate().unwrap();
    }

    #[test]
    fn zero_bounds_rejected() {
        let cfg = RunConfig {
            cluster_bound: 0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn http_without_url_rejected() {
        let cfg = RunConfig {
            oracle: OracleKind::Http,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
}
