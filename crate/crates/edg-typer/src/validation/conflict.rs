use super::checker::Diagnostic;
use crate::frontend::{EntityId, EntityIndex, SlotId, TypeSlot};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Where a freshly applied annotation landed in the working copy.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AppliedSlot {
    pub slot: SlotId,
    pub file: String,
    /// 1-based line of the annotated definition in the working copy.
    pub line: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConflictCategory {
    /// Body-level errors inside the annotated function: the annotation
    /// admits values the body cannot handle.
    ParamTooPermissive,
    /// Errors at call sites of the annotated function: the annotation
    /// rejects arguments the callers pass.
    ParamTooRestrictive,
    OverrideMismatch,
    /// The inserted annotation names something undefined.
    NameUndefined,
    Other,
}

/// Checker diagnostics attributed to the annotations applied this step.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConflictReport {
    pub diagnostics: Vec<Diagnostic>,
    pub culprit_slots: Vec<SlotId>,
    pub category: ConflictCategory,
    /// For override conflicts: the parent method whose annotation is in
    /// question, and the child signature that constrains it.
    pub override_parent: Option<EntityId>,
    pub override_child: Option<EntityId>,
}

/// Attribute a nonempty batch of diagnostics to the applied annotations.
///
/// Each diagnostic is mapped to the narrowest entity whose defining span
/// contains its location. Category priority: override mismatches, then
/// undefined names on inserted annotation lines, then call-site
/// conflicts, then body-level conflicts, then everything else (whose
/// culprit defaults to the most recently applied slot).
pub fn attribute_conflicts(
    diags: &[Diagnostic],
    applied: &[AppliedSlot],
    index: &EntityIndex,
) -> ConflictReport {
    let applied_by_entity: BTreeMap<&EntityId, Vec<&AppliedSlot>> = {
        let mut m: BTreeMap<&EntityId, Vec<&AppliedSlot>> = BTreeMap::new();
        for a in applied {
            m.entry(&a.slot.entity).or_default().push(a);
        }
        m
    };

    let mut override_hits: Vec<(&Diagnostic, Option<EntityId>, Option<EntityId>)> = Vec::new();
    let mut name_hits: Vec<(&Diagnostic, SlotId)> = Vec::new();
    let mut callsite_hits: Vec<(&Diagnostic, EntityId)> = Vec::new();
    let mut body_hits: Vec<(&Diagnostic, EntityId)> = Vec::new();
    let mut other_hits: Vec<&Diagnostic> = Vec::new();

    for d in diags {
        let enclosing = enclosing_entity(index, &d.file, d.line);

        if d.error_code == "override" {
            let child = enclosing.clone();
            let parent = child
                .as_ref()
                .and_then(|c| parent_method(index, c, &d.message));
            override_hits.push((d, parent, child));
            continue;
        }

        if d.error_code == "name-defined" {
            if let Some(a) = applied
                .iter()
                .find(|a| a.file == d.file && a.line == d.line)
            {
                name_hits.push((d, a.slot.clone()));
                continue;
            }
        }

        if matches!(d.error_code.as_str(), "arg-type" | "call-arg") {
            if let Some(callee) = quoted_callee(&d.message) {
                let applied_callee = applied_by_entity
                    .keys()
                    .find(|id| id.basename() == callee)
                    .map(|id| (*id).clone());
                if let Some(callee_id) = applied_callee {
                    let inside_callee = enclosing.as_ref() == Some(&callee_id);
                    if !inside_callee {
                        callsite_hits.push((d, callee_id));
                        continue;
                    }
                }
            }
        }

        match enclosing {
            Some(e) if applied_by_entity.contains_key(&e) => body_hits.push((d, e)),
            _ => other_hits.push(d),
        }
    }

    let slots_of = |entity: &EntityId| -> Vec<SlotId> {
        applied_by_entity
            .get(entity)
            .map(|v| v.iter().map(|a| a.slot.clone()).collect())
            .unwrap_or_default()
    };

    if !override_hits.is_empty() {
        let mut culprits = Vec::new();
        let (_, parent, child) = &override_hits[0];
        for e in [parent, child].into_iter().flatten() {
            culprits.extend(slots_of(e));
        }
        if culprits.is_empty() {
            if let Some(last) = applied.last() {
                culprits.push(last.slot.clone());
            }
        }
        return ConflictReport {
            diagnostics: diags.to_vec(),
            culprit_slots: dedup(culprits),
            category: ConflictCategory::OverrideMismatch,
            override_parent: parent.clone(),
            override_child: child.clone(),
        };
    }
    if !name_hits.is_empty() {
        return ConflictReport {
            diagnostics: diags.to_vec(),
            culprit_slots: dedup(name_hits.into_iter().map(|(_, s)| s).collect()),
            category: ConflictCategory::NameUndefined,
            override_parent: None,
            override_child: None,
        };
    }
    if !callsite_hits.is_empty() {
        let culprits = callsite_hits
            .iter()
            .flat_map(|(_, e)| slots_of(e))
            .collect();
        return ConflictReport {
            diagnostics: diags.to_vec(),
            culprit_slots: dedup(culprits),
            category: ConflictCategory::ParamTooRestrictive,
            override_parent: None,
            override_child: None,
        };
    }
    if !body_hits.is_empty() {
        let culprits = body_hits.iter().flat_map(|(_, e)| slots_of(e)).collect();
        return ConflictReport {
            diagnostics: diags.to_vec(),
            culprit_slots: dedup(culprits),
            category: ConflictCategory::ParamTooPermissive,
            override_parent: None,
            override_child: None,
        };
    }
    // Unattributable: charge the most recently applied slot.
    let culprits = applied
        .last()
        .map(|a| vec![a.slot.clone()])
        .unwrap_or_default();
    ConflictReport {
        diagnostics: diags.to_vec(),
        culprit_slots: culprits,
        category: ConflictCategory::Other,
        override_parent: None,
        override_child: None,
    }
}

/// Narrowest entity whose defining span contains the location.
fn enclosing_entity(index: &EntityIndex, file: &str, line: u32) -> Option<EntityId> {
    let mut best: Option<(&EntityId, u32)> = None;
    for (id, e) in index.iter() {
        if e.defining_span.contains_line(file, line) {
            let width = e.defining_span.end_line - e.defining_span.start_line;
            if best.is_none_or(|(_, w)| width < w) {
                best = Some((id, width));
            }
        }
    }
    best.map(|(id, _)| id.clone())
}

/// Parent method entity for an override diagnostic, derived from the
/// `supertype "Base"` fragment of the message.
fn parent_method(index: &EntityIndex, child: &EntityId, message: &str) -> Option<EntityId> {
    let base = quoted_after(message, "supertype ")?;
    let method = child.basename();
    index
        .iter()
        .find(|(id, e)| {
            e.kind == crate::frontend::EntityKind::Class && id.basename() == base
        })
        .map(|(id, _)| EntityId(format!("{id}.{method}")))
        .filter(|id| index.contains(id))
}

/// Callee name quoted in arg-type/call-arg messages, e.g.
/// `Argument 1 to "f" has ...` or `Too many arguments for "f"`.
fn quoted_callee(message: &str) -> Option<String> {
    for marker in ["to \"", "for \"", "in call to \""] {
        if let Some(name) = quoted_after(message, &marker[..marker.len() - 1]) {
            return Some(name);
        }
    }
    None
}

fn quoted_after(message: &str, marker: &str) -> Option<String> {
    let at = message.find(marker)? + marker.len();
    let rest = &message[at..];
    let rest = rest.strip_prefix('"')?;
    let end = rest.find('"')?;
    Some(rest[..end].to_string())
}

fn dedup(mut slots: Vec<SlotId>) -> Vec<SlotId> {
    slots.sort();
    slots.dedup();
    slots
}

/// Context the resolver needs about the pipeline state.
pub struct ResolveState<'a> {
    pub slots: &'a BTreeMap<SlotId, TypeSlot>,
    /// Tool-applied bindings currently in the working copy.
    pub applied_bindings: &'a BTreeMap<SlotId, String>,
    pub index: &'a EntityIndex,
    pub attempt_bound: u8,
}

/// The repair to perform; the driver owns applying it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Resolution {
    /// Revert the batch and re-infer with the diagnostics as feedback
    /// (iterative type narrowing).
    Narrow { slots: Vec<SlotId>, feedback: Vec<String> },
    /// Revert the annotated entity and re-queue it with call-site context.
    InvalidateFunction {
        entity: EntityId,
        call_site_context: Vec<String>,
    },
    /// Keep the child, revert the parent method's annotations, and
    /// re-queue the parent constrained by the child signature.
    InvalidateParent {
        parent: EntityId,
        child_signature: String,
    },
    /// Revert the batch and re-infer with the raw messages as feedback.
    Refine { slots: Vec<SlotId>, feedback: Vec<String> },
    /// Replace the slot annotations with `Any`.
    Fallback { slots: Vec<SlotId> },
}

/// Choose the repair for a conflict report. Total: every report yields a
/// resolution, and slots that exhausted their attempts always fall back.
pub fn resolve_conflict(report: &ConflictReport, state: &ResolveState<'_>) -> Resolution {
    let exhausted: Vec<SlotId> = report
        .culprit_slots
        .iter()
        .filter(|s| {
            state
                .slots
                .get(s)
                .map(|slot| slot.attempts >= state.attempt_bound)
                .unwrap_or(false)
        })
        .cloned()
        .collect();
    if !exhausted.is_empty() {
        return Resolution::Fallback { slots: exhausted };
    }

    let feedback: Vec<String> = report.diagnostics.iter().map(|d| d.to_string()).collect();
    match report.category {
        ConflictCategory::ParamTooPermissive => Resolution::Narrow {
            slots: report.culprit_slots.clone(),
            feedback,
        },
        ConflictCategory::ParamTooRestrictive => {
            let entity = report
                .culprit_slots
                .first()
                .map(|s| s.entity.clone())
                .expect("restrictive conflicts carry culprits");
            Resolution::InvalidateFunction {
                entity,
                call_site_context: feedback,
            }
        }
        ConflictCategory::OverrideMismatch => {
            // Only tool-applied parent annotations can be invalidated;
            // developer annotations are ground truth, so the child yields.
            let parent_applied = report.override_parent.as_ref().is_some_and(|p| {
                state.applied_bindings.keys().any(|s| &s.entity == p)
            });
            match (&report.override_parent, &report.override_child) {
                (Some(parent), Some(child)) if parent_applied => Resolution::InvalidateParent {
                    parent: parent.clone(),
                    child_signature: signature_of(state.index, child, state.slots),
                },
                _ => Resolution::Refine {
                    slots: report.culprit_slots.clone(),
                    feedback,
                },
            }
        }
        ConflictCategory::NameUndefined | ConflictCategory::Other => Resolution::Refine {
            slots: report.culprit_slots.clone(),
            feedback,
        },
    }
}

/// Render a method signature constraint like `m(x: str) -> int` from the
/// current slot annotations.
fn signature_of(
    index: &EntityIndex,
    entity: &EntityId,
    slots: &BTreeMap<SlotId, TypeSlot>,
) -> String {
    let name = entity.basename();
    let Some(e) = index.get(entity) else {
        return name.to_string();
    };
    let mut params = Vec::new();
    let mut ret = "None".to_string();
    for slot in &e.slots {
        let ann = slots
            .get(&slot.id)
            .and_then(|s| s.annotation.clone())
            .unwrap_or_else(|| "Any".to_string());
        match &slot.id.role {
            crate::frontend::SlotRole::Param(p) => params.push(format!("{p}: {ann}")),
            crate::frontend::SlotRole::Return => ret = ann,
            crate::frontend::SlotRole::Var => {}
        }
    }
    format!("{name}({}) -> {ret}", params.join(", "))
}
