//! Condense a cyclic dependency graph into bounded entity clusters.
//!
//! Builds an 8-entity graph with a 6-cycle, condenses at the default
//! bound of 5, and shows the resulting cluster DAG plus the edges the
//! greedy decomposition removed.
//!
//! ```sh
//! cargo run --example condense_clusters
//! ```

use edg_typer::edg::{
    condense_and_bound, merge_new_edges, DependencyEdge, EdgeKind, EdgeOrigin,
    EntityDependencyGraph, DEFAULT_CLUSTER_BOUND,
};
use edg_typer::frontend::EntityId;

fn main() {
    let names: Vec<String> = (0..8).map(|i| format!("pkg.mod.e{i}")).collect();
    let mut graph =
        EntityDependencyGraph::with_nodes(names.iter().map(|n| EntityId(n.clone())));

    let mut edges = Vec::new();
    // A six-entity cycle, larger than the cluster bound.
    for i in 0..6 {
        edges.push((i, (i + 1) % 6));
    }
    // Two acyclic tails hanging off the cycle.
    edges.push((6, 0));
    edges.push((7, 6));

    let probed: Vec<DependencyEdge> = edges
        .into_iter()
        .map(|(f, t)| DependencyEdge {
            from: EntityId(names[f].clone()),
            to: EntityId(names[t].clone()),
            kind: EdgeKind::Call,
            origin: EdgeOrigin::Pattern,
        })
        .collect();
    merge_new_edges(&mut graph, probed);

    let dag = condense_and_bound(&graph, DEFAULT_CLUSTER_BOUND);
    println!("clusters (bound {DEFAULT_CLUSTER_BOUND}):");
    for cluster in &dag.clusters {
        let members: Vec<&str> = cluster.members.iter().map(|m| m.as_str()).collect();
        println!("  {} = {{{}}}", cluster.cluster_id, members.join(", "));
        for removed in &cluster.removed_internal_edges {
            println!("    removed internal edge {} -> {}", removed.from, removed.to);
        }
    }
    println!("cluster edges:");
    for (from, to) in &dag.cluster_edges {
        println!("  {from} -> {to}");
    }
}
