//! Graph-side properties: SCC condensation against a brute-force
//! reachability oracle, bounding, conservation, and export shape.

mod common;

use common::XorShift;
use edg_typer::edg::{
    build_edg, condense_and_bound, merge_new_edges, to_json, DependencyEdge, EdgeKind, EdgeOrigin,
    EntityDependencyGraph,
};
use edg_typer::frontend::{extract_entities, resolve_statement_refs, EntityId};
use std::collections::{BTreeMap, BTreeSet};

fn random_graph(rng: &mut XorShift, max_nodes: usize) -> (Vec<String>, Vec<(usize, usize)>) {
    let n = 2 + rng.below(max_nodes - 1);
    let nodes: Vec<String> = (0..n).map(|i| format!("n{i:02}")).collect();
    let m = rng.below(n * 2) + n / 2;
    let mut edges = BTreeSet::new();
    for _ in 0..m {
        let f = rng.below(n);
        let t = rng.below(n);
        if f != t {
            edges.insert((f, t));
        }
    }
    (nodes, edges.into_iter().collect())
}

fn graph_of(nodes: &[String], edges: &[(usize, usize)]) -> EntityDependencyGraph {
    let mut g =
        EntityDependencyGraph::with_nodes(nodes.iter().map(|n| EntityId(n.clone())));
    let probed: Vec<DependencyEdge> = edges
        .iter()
        .map(|(f, t)| DependencyEdge {
            from: EntityId(nodes[*f].clone()),
            to: EntityId(nodes[*t].clone()),
            kind: EdgeKind::Access,
            origin: EdgeOrigin::Pattern,
        })
        .collect();
    merge_new_edges(&mut g, probed);
    g
}

/// Brute-force SCCs by pairwise mutual reachability over the transitive
/// closure (Floyd–Warshall).
#[allow(clippy::needless_range_loop)]
pub fn scc_oracle(n: usize, edges: &[(usize, usize)]) -> Vec<BTreeSet<usize>> {
    let mut reach = vec![vec![false; n]; n];
    for i in 0..n {
        reach[i][i] = true;
    }
    for (f, t) in edges {
        reach[*f][*t] = true;
    }
    for k in 0..n {
        for i in 0..n {
            if reach[i][k] {
                for j in 0..n {
                    if reach[k][j] {
                        reach[i][j] = true;
                    }
                }
            }
        }
    }
    let mut assigned = vec![false; n];
    let mut out = Vec::new();
    for i in 0..n {
        if assigned[i] {
            continue;
        }
        let mut class = BTreeSet::new();
        for j in 0..n {
            if reach[i][j] && reach[j][i] {
                class.insert(j);
                assigned[j] = true;
            }
        }
        out.push(class);
    }
    out
}

fn cluster_sets(g: &EntityDependencyGraph, bound: usize, nodes: &[String]) -> Vec<BTreeSet<usize>> {
    let pos: BTreeMap<&str, usize> = nodes.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    condense_and_bound(g, bound)
        .clusters
        .iter()
        .map(|c| c.members.iter().map(|m| pos[m.as_str()]).collect())
        .collect()
}

#[test]
fn condensation_matches_reachability_oracle() {
    let mut rng = XorShift(0x5eed_0001);
    for _ in 0..200 {
        let (nodes, edges) = random_graph(&mut rng, 50);
        let g = graph_of(&nodes, &edges);
        let mut got = cluster_sets(&g, nodes.len(), &nodes);
        let mut want = scc_oracle(nodes.len(), &edges);
        got.sort();
        want.sort();
        assert_eq!(got, want);
    }
}

#[test]
fn bounded_condensation_partitions_and_conserves() {
    let mut rng = XorShift(0x5eed_0002);
    for _ in 0..100 {
        let (nodes, mut edges) = random_graph(&mut rng, 30);
        // Force a large SCC: a cycle through every node.
        for i in 0..nodes.len() {
            let j = (i + 1) % nodes.len();
            if i != j {
                edges.push((i, j));
            }
        }
        edges.sort();
        edges.dedup();
        let g = graph_of(&nodes, &edges);
        let dag = condense_and_bound(&g, 5);

        for c in &dag.clusters {
            assert!(c.members.len() <= 5, "cluster over bound: {:?}", c.members);
        }
        let mut seen = BTreeSet::new();
        for c in &dag.clusters {
            for m in &c.members {
                assert!(seen.insert(m.clone()), "node in two clusters: {m}");
            }
        }
        assert_eq!(seen.len(), nodes.len());

        // Every original edge is internal, crossing, or recorded-removed.
        let removed: BTreeSet<(String, String)> = dag
            .clusters
            .iter()
            .flat_map(|c| c.removed_internal_edges.iter())
            .map(|e| (e.from.0.clone(), e.to.0.clone()))
            .collect();
        let cluster_of: BTreeMap<&str, &str> = dag
            .clusters
            .iter()
            .flat_map(|c| c.members.iter().map(move |m| (m.as_str(), c.cluster_id.as_str())))
            .collect();
        for e in g.edges() {
            let same = cluster_of[e.from.as_str()] == cluster_of[e.to.as_str()];
            let crossing = dag.cluster_edges.contains(&(
                cluster_of[e.from.as_str()].to_string(),
                cluster_of[e.to.as_str()].to_string(),
            ));
            let was_removed = removed.contains(&(e.from.0.clone(), e.to.0.clone()));
            assert!(
                same || crossing || was_removed,
                "edge {} -> {} unaccounted",
                e.from,
                e.to
            );
        }

        // Condensed graph is acyclic (independent Kahn check).
        assert!(kahn_acyclic(&dag));
    }
}

fn kahn_acyclic(dag: &edg_typer::edg::ClusterDag) -> bool {
    let mut indeg: BTreeMap<&str, usize> = dag
        .clusters
        .iter()
        .map(|c| (c.cluster_id.as_str(), 0))
        .collect();
    for (_, to) in &dag.cluster_edges {
        *indeg.get_mut(to.as_str()).unwrap() += 1;
    }
    let mut queue: Vec<&str> = indeg
        .iter()
        .filter(|(_, d)| **d == 0)
        .map(|(k, _)| *k)
        .collect();
    let mut seen = 0;
    while let Some(c) = queue.pop() {
        seen += 1;
        for (from, to) in &dag.cluster_edges {
            if from == c {
                let d = indeg.get_mut(to.as_str()).unwrap();
                *d -= 1;
                if *d == 0 {
                    queue.push(to);
                }
            }
        }
    }
    seen == dag.clusters.len()
}

#[test]
fn determinism_same_inputs_same_graph_and_clusters() {
    let repo = edg_typer::frontend::load_repo(&common::fixture("flask_mini")).unwrap();
    let render = || {
        let index = extract_entities(&repo);
        let refs = resolve_statement_refs(&repo, &index);
        let g = build_edg(&index, &refs);
        let dag = condense_and_bound(&g, 5);
        let ids: Vec<String> = dag.clusters.iter().map(|c| c.cluster_id.clone()).collect();
        (serde_json::to_string(&to_json(&g, &index)).unwrap(), ids)
    };
    assert_eq!(render(), render());
}

#[test]
fn fig1b_access_edge_present_and_probed_edge_absent_initially() {
    let repo = edg_typer::frontend::load_repo(&common::fixture("flask_mini")).unwrap();
    let index = extract_entities(&repo);
    let refs = resolve_statement_refs(&repo, &index);
    let g = build_edg(&index, &refs);
    assert!(g.has_edge(
        &"app.helpers.after_this_request".into(),
        &"app.globals._cv_request".into(),
        EdgeKind::Access
    ));
    assert!(!g.has_edge(
        &"app.helpers.after_this_request".into(),
        &"app.ctx.RequestContext._after_request_functions".into(),
        EdgeKind::Access
    ));
}

#[test]
fn monotonicity_merge_never_removes() {
    let mut rng = XorShift(0x5eed_0003);
    for _ in 0..50 {
        let (nodes, edges) = random_graph(&mut rng, 20);
        let mut g = graph_of(&nodes, &edges);
        let before: BTreeSet<String> = g.edges().map(|e| format!("{}>{}", e.from, e.to)).collect();
        let extra = DependencyEdge {
            from: EntityId(nodes[0].clone()),
            to: EntityId(nodes[nodes.len() - 1].clone()),
            kind: EdgeKind::Access,
            origin: EdgeOrigin::Probed,
        };
        merge_new_edges(&mut g, vec![extra]);
        let after: BTreeSet<String> = g.edges().map(|e| format!("{}>{}", e.from, e.to)).collect();
        assert!(before.is_subset(&after));
    }
}
