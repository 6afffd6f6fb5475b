use super::graph::{DependencyEdge, EntityDependencyGraph};
use crate::frontend::EntityId;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// Maximum members per entity cluster.
pub const DEFAULT_CLUSTER_BOUND: usize = 5;

/// A set of mutually dependent entities, bounded in size.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EntityCluster {
    /// Lexicographically smallest member id; stable across runs.
    pub cluster_id: String,
    pub members: BTreeSet<EntityId>,
    /// Edges removed to satisfy the size bound. They no longer schedule,
    /// but are retained for context building.
    pub removed_internal_edges: Vec<DependencyEdge>,
}

/// SCC condensation of the EDG: clusters partition the nodes and the
/// cluster graph is acyclic.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterDag {
    pub clusters: Vec<EntityCluster>,
    /// (from cluster id, to cluster id), oriented dependent → dependency.
    pub cluster_edges: BTreeSet<(String, String)>,
}

impl ClusterDag {
    pub fn cluster(&self, id: &str) -> Option<&EntityCluster> {
        self.clusters.iter().find(|c| c.cluster_id == id)
    }

    pub fn cluster_of(&self, entity: &EntityId) -> Option<&EntityCluster> {
        self.clusters.iter().find(|c| c.members.contains(entity))
    }

    /// Dependency-successor cluster ids of `id`.
    pub fn successors<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.cluster_edges
            .iter()
            .filter(move |(from, _)| from == id)
            .map(|(_, to)| to.as_str())
    }
}

/// Condense the EDG into SCC clusters and greedily decompose any cluster
/// larger than `bound` by removing internal edges.
///
/// Each removal picks the edge minimizing the size of the largest
/// remaining SCC, breaking ties by fewest resulting SCCs and then the
/// lexicographically smallest `(from, to)` pair.
pub fn condense_and_bound(g: &EntityDependencyGraph, bound: usize) -> ClusterDag {
    let nodes: Vec<EntityId> = g.nodes.iter().cloned().collect();
    let node_ix: BTreeMap<&EntityId, usize> = nodes.iter().enumerate().map(|(i, n)| (n, i)).collect();

    // Connectivity works on deduplicated (from, to) pairs.
    let mut pairs: BTreeSet<(usize, usize)> = BTreeSet::new();
    for e in g.edges() {
        let (Some(&f), Some(&t)) = (node_ix.get(&e.from), node_ix.get(&e.to)) else {
            continue;
        };
        pairs.insert((f, t));
    }

    let mut removed: BTreeSet<(usize, usize)> = BTreeSet::new();
    loop {
        let sccs = sccs_of(nodes.len(), pairs.iter().filter(|p| !removed.contains(p)));
        let Some(oversized) = sccs.iter().filter(|s| s.len() > bound).min_by_key(|s| {
            s.iter().map(|&i| &nodes[i]).min().cloned()
        }) else {
            break;
        };
        let member_set: BTreeSet<usize> = oversized.iter().copied().collect();
        let internal: Vec<(usize, usize)> = pairs
            .iter()
            .filter(|p| {
                !removed.contains(p) && member_set.contains(&p.0) && member_set.contains(&p.1)
            })
            .copied()
            .collect();

        type Candidate<'a> = ((usize, usize), (&'a EntityId, &'a EntityId), (usize, usize));
        let mut best: Option<Candidate<'_>> = None;
        for cand in &internal {
            let metric = scc_metric(
                nodes.len(),
                pairs
                    .iter()
                    .filter(|p| !removed.contains(p) && *p != cand),
                &member_set,
            );
            let cand_ids = (&nodes[cand.0], &nodes[cand.1]);
            let better = match &best {
                None => true,
                Some((_, best_ids, best_metric)) => {
                    (metric, cand_ids) < (*best_metric, *best_ids)
                }
            };
            if better {
                best = Some((*cand, cand_ids, metric));
            }
        }
        match best {
            Some((edge, _, _)) => {
                removed.insert(edge);
            }
            // An SCC larger than 1 always has internal edges; nothing to
            // remove means nothing is oversized.
            None => break,
        }
    }

    // Final clusters are the SCCs of the graph minus removed pairs.
    let sccs = sccs_of(nodes.len(), pairs.iter().filter(|p| !removed.contains(p)));
    let mut clusters: Vec<EntityCluster> = sccs
        .into_iter()
        .map(|scc| {
            let members: BTreeSet<EntityId> = scc.iter().map(|&i| nodes[i].clone()).collect();
            let cluster_id = members.iter().next().unwrap().0.clone();
            EntityCluster {
                cluster_id,
                members,
                removed_internal_edges: Vec::new(),
            }
        })
        .collect();
    clusters.sort_by(|a, b| a.cluster_id.cmp(&b.cluster_id));

    let mut owner_of: BTreeMap<usize, usize> = BTreeMap::new();
    for (ci, c) in clusters.iter().enumerate() {
        for m in &c.members {
            owner_of.insert(node_ix[m], ci);
        }
    }

    // Removed pairs carry all their parallel kind edges, recorded on the
    // cluster that contains the dependent endpoint.
    for (f, t) in &removed {
        let from_id = &nodes[*f];
        let to_id = &nodes[*t];
        let ci = owner_of[f];
        for e in g.edges() {
            if &e.from == from_id && &e.to == to_id {
                clusters[ci].removed_internal_edges.push(e);
            }
        }
    }
    for c in &mut clusters {
        c.removed_internal_edges.sort();
    }

    let mut cluster_edges = BTreeSet::new();
    for (f, t) in pairs.iter().filter(|p| !removed.contains(p)) {
        let (cf, ct) = (owner_of[f], owner_of[t]);
        if cf != ct {
            cluster_edges.insert((
                clusters[cf].cluster_id.clone(),
                clusters[ct].cluster_id.clone(),
            ));
        }
    }

    ClusterDag {
        clusters,
        cluster_edges,
    }
}

/// (largest SCC size, SCC count) over the subgraph induced on `within`.
fn scc_metric<'a>(
    n: usize,
    pairs: impl Iterator<Item = &'a (usize, usize)>,
    within: &BTreeSet<usize>,
) -> (usize, usize) {
    let filtered: Vec<(usize, usize)> = pairs
        .filter(|(f, t)| within.contains(f) && within.contains(t))
        .copied()
        .collect();
    let sccs = sccs_of(n, filtered.iter());
    let relevant: Vec<&Vec<usize>> = sccs
        .iter()
        .filter(|s| within.contains(&s[0]))
        .collect();
    let max = relevant.iter().map(|s| s.len()).max().unwrap_or(0);
    (max, relevant.len())
}

/// Tarjan over `n` nodes with the given edge pairs.
fn sccs_of<'a>(n: usize, pairs: impl Iterator<Item = &'a (usize, usize)>) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); n];
    for (f, t) in pairs {
        adj[*f].push(*t);
    }

    struct State {
        index: usize,
        stack: Vec<usize>,
        on_stack: Vec<bool>,
        idx: Vec<Option<usize>>,
        low: Vec<usize>,
        comps: Vec<Vec<usize>>,
    }

    fn connect(v: usize, adj: &[Vec<usize>], st: &mut State) {
        st.idx[v] = Some(st.index);
        st.low[v] = st.index;
        st.index += 1;
        st.stack.push(v);
        st.on_stack[v] = true;
        for &w in &adj[v] {
            if st.idx[w].is_none() {
                connect(w, adj, st);
                st.low[v] = st.low[v].min(st.low[w]);
            } else if st.on_stack[w] {
                st.low[v] = st.low[v].min(st.idx[w].unwrap());
            }
        }
        if st.low[v] == st.idx[v].unwrap() {
            let mut comp = Vec::new();
            loop {
                let w = st.stack.pop().expect("stack underflow");
                st.on_stack[w] = false;
                comp.push(w);
                if w == v {
                    break;
                }
            }
            comp.sort_unstable();
            st.comps.push(comp);
        }
    }

    let mut st = State {
        index: 0,
        stack: Vec::new(),
        on_stack: vec![false; n],
        idx: vec![None; n],
        low: vec![0; n],
        comps: Vec::new(),
    };
    for v in 0..n {
        if st.idx[v].is_none() {
            connect(v, &adj, &mut st);
        }
    }
    st.comps
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::edg::graph::{merge_new_edges, EdgeKind, EdgeOrigin};

    fn graph(nodes: &[&str], edges: &[(&str, &str)]) -> EntityDependencyGraph {
        let mut g =
            EntityDependencyGraph::with_nodes(nodes.iter().map(|n| EntityId(n.to_string())));
        let probed: Vec<DependencyEdge> = edges
            .iter()
            .map(|(f, t)| DependencyEdge {
                from: EntityId(f.to_string()),
                to: EntityId(t.to_string()),
                kind: EdgeKind::Access,
                origin: EdgeOrigin::Pattern,
            })
            .collect();
        merge_new_edges(&mut g, probed);
        g
    }

    #[test]
    fn two_cycle_collapses() {
        let g = graph(&["a", "b"], &[("a", "b"), ("b", "a")]);
        let dag = condense_and_bound(&g, 5);
        assert_eq!(dag.clusters.len(), 1);
        assert_eq!(dag.clusters[0].members.len(), 2);
        assert!(dag.cluster_edges.is_empty());
    }

    #[test]
    fn acyclic_chain_stays_singletons() {
        let g = graph(&["a", "b", "c", "d"], &[("a", "b"), ("b", "c"), ("c", "d")]);
        let dag = condense_and_bound(&g, 5);
        assert_eq!(dag.clusters.len(), 4);
        assert_eq!(dag.cluster_edges.len(), 3);
    }

    #[test]
    fn oversized_cycle_is_decomposed() {
        // 7-cycle: removing edges must leave all parts <= 3.
        let names: Vec<String> = (0..7).map(|i| format!("n{i}")).collect();
        let edges: Vec<(String, String)> = (0..7)
            .map(|i| (names[i].clone(), names[(i + 1) % 7].clone()))
            .collect();
        let node_refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
        let edge_refs: Vec<(&str, &str)> = edges.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
        let g = graph(&node_refs, &edge_refs);
        let dag = condense_and_bound(&g, 3);
        assert!(dag.clusters.iter().all(|c| c.members.len() <= 3));
        // Partition covers all nodes.
        let total: usize = dag.clusters.iter().map(|c| c.members.len()).sum();
        assert_eq!(total, 7);
        // Edge conservation: each of the 7 edges is internal, crossing, or removed.
        let removed: usize = dag.clusters.iter().map(|c| c.removed_internal_edges.len()).sum();
        let crossing = dag.cluster_edges.len();
        let internal: usize = 7 - removed - crossing;
        assert_eq!(internal + removed + crossing, 7);
    }

    #[test]
    fn decomposed_dag_is_acyclic() {
        let g = graph(
            &["a", "b", "c", "d", "e", "f"],
            &[
                ("a", "b"),
                ("b", "c"),
                ("c", "a"),
                ("c", "d"),
                ("d", "e"),
                ("e", "f"),
                ("f", "d"),
                ("d", "a"),
            ],
        );
        let dag = condense_and_bound(&g, 2);
        assert!(dag.clusters.iter().all(|c| c.members.len() <= 2));
        assert!(dag_is_acyclic(&dag));
    }

    pub(crate) fn dag_is_acyclic(dag: &ClusterDag) -> bool {
        // Kahn's algorithm.
        let ids: Vec<&str> = dag.clusters.iter().map(|c| c.cluster_id.as_str()).collect();
        let mut indeg: BTreeMap<&str, usize> = ids.iter().map(|&i| (i, 0)).collect();
        for (_, to) in &dag.cluster_edges {
            *indeg.get_mut(to.as_str()).unwrap() += 1;
        }
        let mut queue: Vec<&str> = indeg
            .iter()
            .filter(|(_, &d)| d == 0)
            .map(|(&i, _)| i)
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
        seen == ids.len()
    }
}
