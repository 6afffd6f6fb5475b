use crate::frontend::{EntityId, EntityIndex, EntityKind, RefKind, StatementRef};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EdgeKind {
    Call,
    Access,
    Inheritance,
    Definition,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EdgeOrigin {
    /// Extracted by pattern matching during EDG construction.
    Pattern,
    /// Added by missing-dependency probing.
    Probed,
}

/// A dependency edge, oriented dependent → dependency.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DependencyEdge {
    pub from: EntityId,
    pub to: EntityId,
    pub kind: EdgeKind,
    pub origin: EdgeOrigin,
}

/// Directed graph over entities. Deduplication key is `(from, to, kind)`;
/// `Pattern` origin wins over `Probed` when both occur.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(from = "GraphWire", into = "GraphWire")]
pub struct EntityDependencyGraph {
    pub nodes: BTreeSet<EntityId>,
    edges: BTreeMap<(EntityId, EntityId, EdgeKind), EdgeOrigin>,
    pub version: u64,
}

/// JSON-friendly shape: edges as a list rather than tuple-keyed map.
#[derive(Serialize, Deserialize)]
struct GraphWire {
    nodes: BTreeSet<EntityId>,
    edges: Vec<DependencyEdge>,
    version: u64,
}

impl From<GraphWire> for EntityDependencyGraph {
    fn from(w: GraphWire) -> Self {
        let mut g = EntityDependencyGraph {
            nodes: w.nodes,
            edges: BTreeMap::new(),
            version: 0,
        };
        for e in w.edges {
            g.insert(e);
        }
        g.version = w.version;
        g
    }
}

impl From<EntityDependencyGraph> for GraphWire {
    fn from(g: EntityDependencyGraph) -> Self {
        GraphWire {
            edges: g.edges().collect(),
            nodes: g.nodes,
            version: g.version,
        }
    }
}

impl EntityDependencyGraph {
    pub fn with_nodes(nodes: impl IntoIterator<Item = EntityId>) -> Self {
        EntityDependencyGraph {
            nodes: nodes.into_iter().collect(),
            ..Default::default()
        }
    }

    pub fn edges(&self) -> impl Iterator<Item = DependencyEdge> + '_ {
        self.edges.iter().map(|((from, to, kind), origin)| DependencyEdge {
            from: from.clone(),
            to: to.clone(),
            kind: *kind,
            origin: *origin,
        })
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, from: &EntityId, to: &EntityId, kind: EdgeKind) -> bool {
        self.edges
            .contains_key(&(from.clone(), to.clone(), kind))
    }

    /// Dependency successors of `from` (deduplicated target ids).
    pub fn successors(&self, from: &EntityId) -> BTreeSet<&EntityId> {
        self.edges
            .keys()
            .filter(|(f, _, _)| f == from)
            .map(|(_, t, _)| t)
            .collect()
    }

    fn insert(&mut self, edge: DependencyEdge) -> bool {
        if edge.from == edge.to {
            return false;
        }
        let key = (edge.from, edge.to, edge.kind);
        match self.edges.get_mut(&key) {
            Some(existing) => {
                if *existing == EdgeOrigin::Probed && edge.origin == EdgeOrigin::Pattern {
                    *existing = EdgeOrigin::Pattern;
                }
                false
            }
            None => {
                self.edges.insert(key, edge.origin);
                true
            }
        }
    }
}

/// Build the initial EDG by mapping resolved references onto the four
/// dependency patterns:
///
/// * call of a function → `Call` (dependent → callee)
/// * read of a variable → `Access` (dependent → variable)
/// * subclassing → `Inheritance` (subclass → superclass)
/// * write by a function to a variable → `Definition`, oriented variable
///   → function (the variable depends on the assigning function)
///
/// References that match no pattern signature (e.g. reads of class
/// objects) add no edge; probing recovers anything that matters later.
pub fn build_edg(index: &EntityIndex, refs: &[StatementRef]) -> EntityDependencyGraph {
    let mut g = EntityDependencyGraph::with_nodes(index.ids().cloned());
    for stmt_ref in refs {
        let Some(owner) = index.get(&stmt_ref.owner) else {
            continue;
        };
        for (target_id, ref_kind) in &stmt_ref.referenced {
            let Some(target) = index.get(target_id) else {
                continue;
            };
            let edge = match (ref_kind, owner.kind, target.kind) {
                (RefKind::Call, EntityKind::Variable | EntityKind::Function, EntityKind::Function) => {
                    Some(EdgeKind::Call)
                }
                (RefKind::Read, EntityKind::Variable | EntityKind::Function, EntityKind::Variable) => {
                    Some(EdgeKind::Access)
                }
                (RefKind::Inherit, EntityKind::Class, EntityKind::Class) => {
                    Some(EdgeKind::Inheritance)
                }
                (RefKind::Write, EntityKind::Function, EntityKind::Variable) => {
                    // Orientation flips: the variable depends on the writer.
                    g.insert(DependencyEdge {
                        from: target_id.clone(),
                        to: stmt_ref.owner.clone(),
                        kind: EdgeKind::Definition,
                        origin: EdgeOrigin::Pattern,
                    });
                    None
                }
                _ => None,
            };
            if let Some(kind) = edge {
                g.insert(DependencyEdge {
                    from: stmt_ref.owner.clone(),
                    to: target_id.clone(),
                    kind,
                    origin: EdgeOrigin::Pattern,
                });
            }
        }
    }
    g.version = 1;
    g
}

/// Result of merging probed edges.
#[derive(Debug, Default)]
pub struct MergeOutcome {
    pub added: usize,
    pub rejected: Vec<(DependencyEdge, String)>,
}

/// Add probed edges; the version increments iff the edge set changed.
/// Edges naming unknown entities are rejected per edge, non-fatally.
pub fn merge_new_edges(
    g: &mut EntityDependencyGraph,
    probed: Vec<DependencyEdge>,
) -> MergeOutcome {
    let mut outcome = MergeOutcome::default();
    for edge in probed {
        if !g.nodes.contains(&edge.from) {
            let reason = format!("unknown entity {}", edge.from);
            outcome.rejected.push((edge, reason));
            continue;
        }
        if !g.nodes.contains(&edge.to) {
            let reason = format!("unknown entity {}", edge.to);
            outcome.rejected.push((edge, reason));
            continue;
        }
        if g.insert(edge) {
            outcome.added += 1;
        }
    }
    if outcome.added > 0 {
        g.version += 1;
    }
    outcome
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{extract_entities, resolve_statement_refs, SourceRepo};

    fn graph_for(files: &[(&str, &str)]) -> EntityDependencyGraph {
        let repo = SourceRepo::from_files(
            files
                .iter()
                .map(|(p, t)| (p.to_string(), t.to_string()))
                .collect(),
        );
        let index = extract_entities(&repo);
        let refs = resolve_statement_refs(&repo, &index);
        build_edg(&index, &refs)
    }

    #[test]
    fn access_edge_from_variable_read() {
        let g = graph_for(&[(
            "app.py",
            "_cv_request = None\n\ndef after_this_request(f):\n    ctx = _cv_request.get()\n    return f\n",
        )]);
        assert!(g.has_edge(
            &"app.after_this_request".into(),
            &"app._cv_request".into(),
            EdgeKind::Access
        ));
    }

    #[test]
    fn inheritance_edge() {
        let g = graph_for(&[("m.py", "class A:\n    pass\n\nclass B(A):\n    pass\n")]);
        assert!(g.has_edge(&"m.B".into(), &"m.A".into(), EdgeKind::Inheritance));
    }

    #[test]
    fn definition_edge_is_flipped() {
        let g = graph_for(&[(
            "m.py",
            "CONFIG = None\n\ndef load():\n    return {}\n\ndef setup():\n    global CONFIG\n    CONFIG = load()\n",
        )]);
        assert!(g.has_edge(&"m.CONFIG".into(), &"m.setup".into(), EdgeKind::Definition));
    }

    #[test]
    fn call_edge_from_variable_definition() {
        let g = graph_for(&[("m.py", "def load():\n    return {}\n\nCONFIG = load()\n")]);
        assert!(g.has_edge(&"m.CONFIG".into(), &"m.load".into(), EdgeKind::Call));
    }

    #[test]
    fn merge_dedups_and_versions() {
        let mut g = graph_for(&[("m.py", "x = 1\ny = x\n")]);
        let v0 = g.version;
        let existing: Vec<DependencyEdge> = g.edges().collect();
        let outcome = merge_new_edges(&mut g, existing);
        assert_eq!(outcome.added, 0);
        assert_eq!(g.version, v0);

        let outcome = merge_new_edges(
            &mut g,
            vec![DependencyEdge {
                from: "m.x".into(),
                to: "m.y".into(),
                kind: EdgeKind::Access,
                origin: EdgeOrigin::Probed,
            }],
        );
        assert_eq!(outcome.added, 1);
        assert_eq!(g.version, v0 + 1);
    }

    #[test]
    fn merge_rejects_unknown_entities() {
        let mut g = graph_for(&[("m.py", "x = 1\n")]);
        let outcome = merge_new_edges(
            &mut g,
            vec![DependencyEdge {
                from: "m.x".into(),
                to: "foo.Bar.baz".into(),
                kind: EdgeKind::Access,
                origin: EdgeOrigin::Probed,
            }],
        );
        assert_eq!(outcome.added, 0);
        assert_eq!(outcome.rejected.len(), 1);
    }

    #[test]
    fn no_self_loops() {
        let g = graph_for(&[("m.py", "def fib(n):\n    return fib(n - 1)\n")]);
        assert!(g.edges().all(|e| e.from != e.to));
    }
}
