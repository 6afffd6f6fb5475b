//! Inference contexts and the pluggable oracle.
//!
//! A context packs a cluster's member definitions with the type
//! annotations of its direct dependencies (never their code). The oracle
//! answers two tasks: report dependencies missing from the context, and
//! generate candidate annotations. Production runs speak JSON over HTTP
//! to an LLM endpoint; tests and the default configuration use the
//! deterministic rule oracle.

mod context;
mod oracle;
mod probe;
mod rule;

pub use context::{build_context, DependencySummary, InferenceContext, DEFAULT_TOKEN_BUDGET};
pub use oracle::{
    HttpOracle, HttpOracleConfig, MissingRef, Oracle, OracleRequest, OracleResponse, OracleTask,
    SlotAnnotation,
};
pub use probe::{
    infer_cluster_types, probe_missing_dependencies, CandidateAnnotation, InferOutcome,
    MissingDependencyReport, MAX_PROBED_EDGES_PER_CLUSTER,
};
pub use rule::RuleOracle;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error("oracle unavailable: {0}")]
    OracleUnavailable(String),
    #[error("malformed oracle response: {0}")]
    MalformedResponse(String),
    #[error("cluster {cluster} definitions ({needed} chars) exceed the token budget ({budget})")]
    OversizeCluster {
        cluster: String,
        needed: usize,
        budget: usize,
    },
}
