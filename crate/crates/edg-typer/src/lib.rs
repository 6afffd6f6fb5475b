//! Repository-level type inference for Python codebases.
//!
//! The engine models inter-procedural type dependencies as an entity
//! dependency graph (EDG), schedules inference over a size-bounded cluster
//! DAG, drives a pluggable oracle to co-evolve dependency edges and type
//! annotations, and validates every batch of annotations with a static
//! type checker, repairing conflicts by backtracking until the output is
//! conflict-free.
//!
//! The crate is organized around the pipeline stages:
//!
//! * [`frontend`] — source loading, entity extraction, reference
//!   resolution, and span-based annotation rewriting.
//! * [`edg`] — the dependency graph, SCC condensation into bounded
//!   clusters, and per-iteration target selection.
//! * [`inference`] — inference contexts and the oracle interface (a
//!   deterministic rule oracle plus an HTTP client).
//! * [`validation`] — type-checker integration, conflict attribution,
//!   and backtracking repair.
//! * [`driver`] — the iterative pipeline, checkpointing, and reporting.
//! * [`metrics`] — type normalization, similarity scoring, and
//!   repository-pair evaluation.
//! * [`pycheck`] — a bundled reference checker emitting mypy-style
//!   diagnostics, used as the default checker subprocess.
//!
//! See the `examples/` directory for one runnable program per capability.

pub mod cli;
pub mod config;
pub mod driver;
pub mod edg;
pub mod frontend;
pub mod inference;
pub mod metrics;
pub mod pycheck;
pub mod types;
pub mod validation;

pub use frontend::{Entity, EntityId, EntityIndex, EntityKind, SlotId, SlotRole, SourceRepo};
pub use types::NormalizedType;
