use super::context::InferenceContext;
use super::oracle::{Oracle, OracleRequest, OracleResponse, OracleTask};
use super::InferenceError;
use crate::edg::{DependencyEdge, EdgeKind, EdgeOrigin};
use crate::frontend::{EntityIndex, EntityKind, SlotId};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Cap on accepted probed edges per cluster per iteration, so oracle
/// hallucination cannot flood the graph.
pub const MAX_PROBED_EDGES_PER_CLUSTER: usize = 10;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct MissingDependencyReport {
    pub cluster_id: String,
    pub proposed_edges: Vec<DependencyEdge>,
    pub unresolved_refs: Vec<String>,
}

/// Ask the oracle which dependencies the context lacks and ground its
/// free-text references against the entity index. Unresolvable or
/// ambiguous references are recorded, not merged.
pub fn probe_missing_dependencies(
    ctx: &InferenceContext,
    oracle: &dyn Oracle,
    index: &EntityIndex,
    members: &BTreeSet<crate::frontend::EntityId>,
) -> Result<MissingDependencyReport, InferenceError> {
    let request = OracleRequest {
        task: OracleTask::FindMissing,
        context: ctx.clone(),
    };
    let response = oracle.respond(&request)?;
    let OracleResponse::Missing(missing) = response else {
        return Err(InferenceError::MalformedResponse(
            "expected missing-dependency response".to_string(),
        ));
    };

    let mut report = MissingDependencyReport {
        cluster_id: ctx.cluster_id.clone(),
        ..Default::default()
    };
    let mut seen: BTreeSet<(String, String)> = BTreeSet::new();
    for m in missing {
        let from = crate::frontend::EntityId(m.from_entity.clone());
        if !members.contains(&from) {
            report.unresolved_refs.push(m.target_ref.clone());
            continue;
        }
        let Some(target) = index.resolve_ref(&m.target_ref) else {
            report.unresolved_refs.push(m.target_ref.clone());
            continue;
        };
        if target.id == from {
            continue;
        }
        if !seen.insert((from.0.clone(), target.id.0.clone())) {
            continue;
        }
        let kind = match target.kind {
            EntityKind::Function => EdgeKind::Call,
            EntityKind::Variable | EntityKind::Class => EdgeKind::Access,
        };
        report.proposed_edges.push(DependencyEdge {
            from,
            to: target.id.clone(),
            kind,
            origin: EdgeOrigin::Probed,
        });
    }
    report
        .proposed_edges
        .sort_by(|a, b| (&a.from, &a.to).cmp(&(&b.from, &b.to)));
    report.proposed_edges.truncate(MAX_PROBED_EDGES_PER_CLUSTER);
    report.unresolved_refs.sort();
    report.unresolved_refs.dedup();
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateAnnotation {
    pub slot: SlotId,
    /// Canonical type text, already validated by the parser.
    pub type_expr: String,
}

#[derive(Debug, Default)]
pub struct InferOutcome {
    pub candidates: Vec<CandidateAnnotation>,
    /// Response entries that failed slot or type parsing.
    pub malformed: Vec<String>,
}

/// Ask the oracle for annotations covering `targets`.
///
/// Responses may be partial; extra slots are dropped, malformed entries
/// are collected for feedback, and every accepted candidate's type
/// expression has passed the type parser.
pub fn infer_cluster_types(
    ctx: &InferenceContext,
    oracle: &dyn Oracle,
    targets: &[SlotId],
) -> Result<InferOutcome, InferenceError> {
    let request = OracleRequest {
        task: OracleTask::InferTypes,
        context: ctx.clone(),
    };
    let response = oracle.respond(&request)?;
    let OracleResponse::Annotations(annotations) = response else {
        return Err(InferenceError::MalformedResponse(
            "expected annotations response".to_string(),
        ));
    };

    let target_set: BTreeSet<&SlotId> = targets.iter().collect();
    let mut outcome = InferOutcome::default();
    for ann in annotations {
        let Some(slot) = SlotId::parse(&ann.slot) else {
            outcome
                .malformed
                .push(format!("unparseable slot id `{}`", ann.slot));
            continue;
        };
        if !target_set.contains(&slot) {
            continue;
        }
        match crate::types::normalize_type(&ann.type_expr) {
            Ok(normalized) => outcome.candidates.push(CandidateAnnotation {
                slot,
                type_expr: normalized.text,
            }),
            Err(e) => outcome.malformed.push(e.to_string()),
        }
    }
    if outcome.candidates.is_empty() && !outcome.malformed.is_empty() {
        return Err(InferenceError::MalformedResponse(
            outcome.malformed.join("; "),
        ));
    }
    outcome.candidates.sort_by_key(|c| c.slot.text());
    Ok(outcome)
}
