use super::InferenceError;
use crate::edg::{EntityCluster, EntityDependencyGraph};
use crate::frontend::{EntityId, EntityIndex, SlotId, TypeSlot};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

pub const DEFAULT_TOKEN_BUDGET: usize = 24_000;

/// One annotated dependency slot, summarized for the oracle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependencySummary {
    pub entity: EntityId,
    pub slot: SlotId,
    pub annotation: String,
}

/// The oracle's view of one cluster: full member definitions, annotation
/// summaries of direct dependencies, and feedback from a prior failed
/// attempt. Serialization is deterministic and bounded by `token_budget`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InferenceContext {
    pub cluster_id: String,
    pub member_definitions: Vec<(EntityId, String)>,
    pub dependency_summaries: Vec<DependencySummary>,
    pub feedback: Vec<String>,
    pub token_budget: usize,
}

impl InferenceContext {
    /// Canonical textual form; its length is what the budget bounds.
    pub fn serialized(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("cluster {}\n", self.cluster_id));
        for (id, code) in &self.member_definitions {
            out.push_str(&format!("entity {id}\n{code}\nend\n"));
        }
        out.push_str("deps:\n");
        for s in &self.dependency_summaries {
            out.push_str(&format!("{} = {}\n", s.slot.text(), s.annotation));
        }
        if !self.feedback.is_empty() {
            out.push_str("feedback:\n");
            for f in &self.feedback {
                out.push_str(&format!("- {f}\n"));
            }
        }
        out
    }
}

/// Build the context for a selected cluster.
///
/// Dependency summaries cover the annotated slots of every direct
/// dependency entity — graph successors outside the cluster plus targets
/// of edges removed during decomposition. If the serialized form exceeds
/// the budget, summaries are dropped from the end of the sorted list;
/// member definitions are never truncated.
pub fn build_context(
    cluster: &EntityCluster,
    graph: &EntityDependencyGraph,
    index: &EntityIndex,
    slots: &BTreeMap<SlotId, TypeSlot>,
    feedback: Vec<String>,
    token_budget: usize,
) -> Result<InferenceContext, InferenceError> {
    let member_definitions: Vec<(EntityId, String)> = cluster
        .members
        .iter()
        .filter_map(|id| index.get(id).map(|e| (id.clone(), e.definition_text.clone())))
        .collect();

    let mut dep_entities: BTreeSet<EntityId> = BTreeSet::new();
    for member in &cluster.members {
        for succ in graph.successors(member) {
            if !cluster.members.contains(succ) {
                dep_entities.insert(succ.clone());
            }
        }
    }
    for removed in &cluster.removed_internal_edges {
        if !cluster.members.contains(&removed.to) {
            dep_entities.insert(removed.to.clone());
        }
    }

    let mut summaries: Vec<DependencySummary> = Vec::new();
    for dep in &dep_entities {
        if let Some(entity) = index.get(dep) {
            for slot in &entity.slots {
                let Some(live) = slots.get(&slot.id) else {
                    continue;
                };
                if let (true, Some(ann)) = (live.is_annotated(), &live.annotation) {
                    summaries.push(DependencySummary {
                        entity: dep.clone(),
                        slot: slot.id.clone(),
                        annotation: ann.clone(),
                    });
                }
            }
        }
    }
    summaries.sort_by(|a, b| (&a.entity, a.slot.text()).cmp(&(&b.entity, b.slot.text())));

    let mut ctx = InferenceContext {
        cluster_id: cluster.cluster_id.clone(),
        member_definitions,
        dependency_summaries: summaries,
        feedback,
        token_budget,
    };
    while ctx.serialized().len() > token_budget && !ctx.dependency_summaries.is_empty() {
        ctx.dependency_summaries.pop();
    }
    let needed = ctx.serialized().len();
    if needed > token_budget {
        return Err(InferenceError::OversizeCluster {
            cluster: cluster.cluster_id.clone(),
            needed,
            budget: token_budget,
        });
    }
    Ok(ctx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::edg::{build_edg, condense_and_bound};
    use crate::frontend::{extract_entities, resolve_statement_refs, SourceRepo, TypeSlot};

    fn setup(
        src: &str,
    ) -> (
        crate::edg::ClusterDag,
        EntityDependencyGraph,
        EntityIndex,
        BTreeMap<SlotId, TypeSlot>,
    ) {
        let repo = SourceRepo::from_files(vec![("m.py".to_string(), src.to_string())]);
        let index = extract_entities(&repo);
        let refs = resolve_statement_refs(&repo, &index);
        let g = build_edg(&index, &refs);
        let dag = condense_and_bound(&g, 5);
        let slots: BTreeMap<SlotId, TypeSlot> = index
            .all_slots()
            .map(|s| (s.id.clone(), s.clone()))
            .collect();
        (dag, g, index, slots)
    }

    #[test]
    fn summaries_contain_annotated_dependency() {
        let src = "_cv: int = 1\n\ndef f(x):\n    return _cv\n";
        let (dag, g, index, slots) = setup(src);
        let cluster = dag.cluster_of(&"m.f".into()).unwrap();
        let ctx = build_context(cluster, &g, &index, &slots, vec![], 10_000).unwrap();
        assert_eq!(ctx.dependency_summaries.len(), 1);
        assert_eq!(ctx.dependency_summaries[0].annotation, "int");
        assert!(ctx.serialized().contains("m._cv#var = int"));
    }

    #[test]
    fn no_dependencies_mean_empty_summaries() {
        let src = "def g():\n    return 1\n";
        let (dag, g, index, slots) = setup(src);
        let cluster = dag.cluster_of(&"m.g".into()).unwrap();
        let ctx = build_context(cluster, &g, &index, &slots, vec![], 10_000).unwrap();
        assert!(ctx.dependency_summaries.is_empty());
    }

    #[test]
    fn deterministic_serialization() {
        let src = "a: int = 1\nb: str = 'x'\n\ndef f():\n    return a + len(b)\n";
        let (dag, g, index, slots) = setup(src);
        let cluster = dag.cluster_of(&"m.f".into()).unwrap();
        let c1 = build_context(cluster, &g, &index, &slots, vec![], 10_000).unwrap();
        let c2 = build_context(cluster, &g, &index, &slots, vec![], 10_000).unwrap();
        assert_eq!(c1.serialized(), c2.serialized());
    }

    #[test]
    fn truncation_drops_summaries_last_first() {
        let src = "a: int = 1\nb: str = 'x'\n\ndef f():\n    return a + len(b)\n";
        let (dag, g, index, slots) = setup(src);
        let cluster = dag.cluster_of(&"m.f".into()).unwrap();
        let full = build_context(cluster, &g, &index, &slots, vec![], 10_000).unwrap();
        assert_eq!(full.dependency_summaries.len(), 2);
        let tight_budget = full.serialized().len() - 1;
        let truncated = build_context(cluster, &g, &index, &slots, vec![], tight_budget).unwrap();
        assert_eq!(truncated.dependency_summaries.len(), 1);
        // The surviving summary is the first in sorted order.
        assert_eq!(truncated.dependency_summaries[0], full.dependency_summaries[0]);
    }

    #[test]
    fn oversize_cluster_is_an_error() {
        let src = "def f():\n    return 1\n";
        let (dag, g, index, slots) = setup(src);
        let cluster = dag.cluster_of(&"m.f".into()).unwrap();
        let err = build_context(cluster, &g, &index, &slots, vec![], 10).unwrap_err();
        assert!(matches!(err, InferenceError::OversizeCluster { .. }));
    }
}
