//! The entity dependency graph and its condensation into a DAG of
//! size-bounded entity clusters.
//!
//! Edges are oriented dependent → dependency: an edge `A → B` means B's
//! type information is a prerequisite for inferring A's. Cluster selection
//! therefore picks clusters whose dependency successors are all annotated,
//! which corresponds to in-degree zero in the reversed residual graph.

mod condense;
mod export;
mod graph;
mod select;

pub use condense::{condense_and_bound, ClusterDag, EntityCluster, DEFAULT_CLUSTER_BOUND};
pub use export::{to_dot, to_json};
pub use graph::{
    build_edg, merge_new_edges, DependencyEdge, EdgeKind, EdgeOrigin, EntityDependencyGraph,
    MergeOutcome,
};
pub use select::select_targets;
