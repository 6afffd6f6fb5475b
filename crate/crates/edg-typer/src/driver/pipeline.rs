use super::report::RunReport;
use super::state::{IterationTrace, PipelineState};
use super::DriverError;
use crate::config::RunConfig;
use crate::edg::{condense_and_bound, merge_new_edges, select_targets, EntityCluster};
use crate::frontend::{apply_annotations, EntityId, EntityIndex, SlotId, SlotState, SourceRepo};
use crate::inference::{
    build_context, infer_cluster_types, probe_missing_dependencies, InferenceError, Oracle,
};
use crate::validation::{
    attribute_conflicts, resolve_conflict, run_checker, AppliedSlot, CheckerConfig, Diagnostic,
    Resolution, ResolveState,
};
use std::collections::BTreeMap;

/// Bound on apply-check-repair rounds within one cluster batch.
const MAX_RESOLUTION_ROUNDS: usize = 8;

/// One reorganize → refine → validate pass.
///
/// Returns the successor state; the input is untouched so an oracle
/// outage aborts the iteration without corrupting anything.
pub fn run_iteration(
    state: &PipelineState,
    index: &EntityIndex,
    oracle: &dyn Oracle,
    config: &RunConfig,
) -> Result<PipelineState, DriverError> {
    let mut st = state.clone();
    let mut changed = false;
    let dag = condense_and_bound(&st.edg, config.cluster_bound);
    let targets: Vec<EntityCluster> = select_targets(&dag, &st.slots)
        .into_iter()
        .cloned()
        .collect();
    let mut trace = IterationTrace {
        iteration: st.iteration,
        selected_clusters: targets.iter().map(|c| c.cluster_id.clone()).collect(),
        ..Default::default()
    };

    for cluster in &targets {
        let cid = cluster.cluster_id.clone();

        // Slots that exhausted their attempts go straight to Any.
        let exhausted: Vec<SlotId> = cluster_slot_ids(cluster, &st.slots)
            .into_iter()
            .filter(|s| {
                let slot = &st.slots[s];
                !slot.is_annotated() && slot.attempts >= config.attempt_bound
            })
            .collect();
        for slot in exhausted {
            fallback_slot(&mut st, &slot);
            trace.slots_fallback.push(slot.text());
            changed = true;
        }

        let pending: Vec<SlotId> = cluster_slot_ids(cluster, &st.slots)
            .into_iter()
            .filter(|s| !st.slots[s].is_annotated())
            .collect();
        if pending.is_empty() {
            continue;
        }

        let feedback = st.feedback.get(&cid).cloned().unwrap_or_default();
        let ctx = match build_context(
            cluster,
            &st.edg,
            index,
            &st.slots,
            feedback,
            config.token_budget,
        ) {
            Ok(ctx) => ctx,
            Err(InferenceError::OversizeCluster { .. }) => {
                for slot in pending {
                    fallback_slot(&mut st, &slot);
                    trace.slots_fallback.push(slot.text());
                    changed = true;
                }
                continue;
            }
            Err(e) => return Err(e.into()),
        };

        // Probe for missing dependencies unless this cluster already came
        // back clean at the current EDG version.
        if st.probe_clean.get(&cid) != Some(&st.edg.version) {
            let report = probe_missing_dependencies(&ctx, oracle, index, &cluster.members)?;
            let outcome = merge_new_edges(&mut st.edg, report.proposed_edges);
            if outcome.added > 0 {
                // New edges: defer the cluster to a later iteration.
                trace.probed_edges_accepted += outcome.added;
                changed = true;
                continue;
            }
            st.probe_clean.insert(cid.clone(), st.edg.version);
        }

        for slot in &pending {
            st.slots.get_mut(slot).unwrap().attempts += 1;
        }
        let outcome = match infer_cluster_types(&ctx, oracle, &pending) {
            Ok(o) => o,
            Err(InferenceError::MalformedResponse(detail)) => {
                st.feedback
                    .insert(cid.clone(), vec![format!("response parse error: {detail}")]);
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        if !outcome.malformed.is_empty() {
            st.feedback.insert(
                cid.clone(),
                outcome
                    .malformed
                    .iter()
                    .map(|m| format!("response parse error: {m}"))
                    .collect(),
            );
        }
        if outcome.candidates.is_empty() {
            continue;
        }

        // Apply the batch and validate it as a unit.
        let mut batch: Vec<SlotId> = Vec::new();
        for cand in &outcome.candidates {
            st.applied.insert(cand.slot.clone(), cand.type_expr.clone());
            let slot = st.slots.get_mut(&cand.slot).unwrap();
            slot.state = SlotState::Inferred;
            slot.annotation = Some(cand.type_expr.clone());
            batch.push(cand.slot.clone());
        }

        let validated =
            validate_batch(&mut st, index, &dag, &cid, &mut batch, config, &mut trace)?;
        if validated {
            st.feedback.remove(&cid);
        }
        changed = true;
    }

    st.iteration += 1;
    if changed {
        st.stall_counter = 0;
    } else {
        st.stall_counter += 1;
    }
    st.trace.push(trace);
    Ok(st)
}

/// Apply-check-repair loop for one cluster batch. Returns whether the
/// (possibly shrunk) batch ended validated; on revert the working copy is
/// byte-identical to its pre-batch state.
fn validate_batch(
    st: &mut PipelineState,
    index: &EntityIndex,
    dag: &crate::edg::ClusterDag,
    cid: &str,
    batch: &mut Vec<SlotId>,
    config: &RunConfig,
    trace: &mut IterationTrace,
) -> Result<bool, DriverError> {
    for _round in 0..MAX_RESOLUTION_ROUNDS {
        let working = apply_annotations(&st.base_repo, &st.applied)?;
        let diags = check_working_copy(&working, &config.checker)?;
        if diags.is_empty() {
            for slot in batch.iter() {
                let s = st.slots.get_mut(slot).unwrap();
                if s.state == SlotState::Inferred {
                    s.state = SlotState::Validated;
                }
                trace.slots_annotated.push(slot.text());
            }
            return Ok(true);
        }

        let working_index = crate::frontend::extract_entities(&working);
        let applied_meta: Vec<AppliedSlot> = batch
            .iter()
            .filter_map(|slot| {
                working_index.get(&slot.entity).map(|e| AppliedSlot {
                    slot: slot.clone(),
                    file: e.defining_span.file.clone(),
                    line: e.defining_span.start_line,
                })
            })
            .collect();
        let report = attribute_conflicts(&diags, &applied_meta, &working_index);
        trace.conflicts.push(format!(
            "{cid}: {:?} culprits=[{}]",
            report.category,
            report
                .culprit_slots
                .iter()
                .map(|s| s.text())
                .collect::<Vec<_>>()
                .join(", ")
        ));
        let resolution = resolve_conflict(
            &report,
            &ResolveState {
                slots: &st.slots,
                applied_bindings: &st.applied,
                index,
                attempt_bound: config.attempt_bound,
            },
        );
        trace.resolutions.push(format!("{cid}: {resolution:?}"));

        match resolution {
            Resolution::Narrow { feedback, .. } | Resolution::Refine { feedback, .. } => {
                revert_batch(st, batch);
                st.feedback.insert(cid.to_string(), feedback);
                return Ok(false);
            }
            Resolution::InvalidateFunction {
                call_site_context, ..
            } => {
                revert_batch(st, batch);
                st.feedback.insert(cid.to_string(), call_site_context);
                return Ok(false);
            }
            Resolution::InvalidateParent {
                parent,
                child_signature,
            } => {
                revert_entity(st, &parent);
                let parent_cluster = dag
                    .cluster_of(&parent)
                    .map(|c| c.cluster_id.clone())
                    .unwrap_or_else(|| parent.0.clone());
                st.feedback.insert(parent_cluster, vec![child_signature]);
                // Keep the batch applied and re-check.
            }
            Resolution::Fallback { slots } => {
                for slot in slots {
                    fallback_slot(st, &slot);
                    trace.slots_fallback.push(slot.text());
                    batch.retain(|b| b != &slot);
                }
                // Re-check with the fallback annotations in place.
            }
        }
    }
    // Resolution rounds exhausted: revert whatever is left of the batch.
    revert_batch(st, batch);
    st.feedback.insert(
        cid.to_string(),
        vec!["conflict resolution did not converge".to_string()],
    );
    Ok(false)
}

fn revert_batch(st: &mut PipelineState, batch: &[SlotId]) {
    for slot in batch {
        st.applied.remove(slot);
        let s = st.slots.get_mut(slot).unwrap();
        if s.state == SlotState::Inferred {
            s.state = SlotState::Unannotated;
            s.annotation = None;
        }
    }
}

/// Remove every tool annotation of an entity (the invalidate-parent path;
/// developer annotations are not in `applied` and cannot be removed).
fn revert_entity(st: &mut PipelineState, entity: &EntityId) {
    let slots: Vec<SlotId> = st
        .applied
        .keys()
        .filter(|s| &s.entity == entity)
        .cloned()
        .collect();
    for slot in slots {
        st.applied.remove(&slot);
        let s = st.slots.get_mut(&slot).unwrap();
        s.state = SlotState::Unannotated;
        s.annotation = None;
    }
}

fn fallback_slot(st: &mut PipelineState, slot: &SlotId) {
    st.applied.insert(slot.clone(), "Any".to_string());
    let s = st.slots.get_mut(slot).unwrap();
    s.state = SlotState::Fallback;
    s.annotation = Some("Any".to_string());
}

fn cluster_slot_ids(
    cluster: &EntityCluster,
    slots: &BTreeMap<SlotId, crate::frontend::TypeSlot>,
) -> Vec<SlotId> {
    slots
        .keys()
        .filter(|s| cluster.members.contains(&s.entity))
        .cloned()
        .collect()
}

fn check_working_copy(
    working: &SourceRepo,
    checker: &CheckerConfig,
) -> Result<Vec<Diagnostic>, DriverError> {
    let dir = tempfile::tempdir().map_err(crate::validation::ValidationError::Workspace)?;
    working
        .write_to_dir(dir.path())
        .map_err(|e| crate::validation::ValidationError::WorkingCopy(e.to_string()))?;
    Ok(run_checker(dir.path(), checker)?)
}

/// Run the full pipeline on a repository.
pub fn run_pipeline(
    repo: SourceRepo,
    config: &RunConfig,
    oracle: &dyn Oracle,
) -> Result<(SourceRepo, RunReport), DriverError> {
    let (state, index) = PipelineState::new(repo);
    run_pipeline_from(state, &index, config, oracle)
}

/// Continue the pipeline from a (possibly checkpointed) state.
pub fn run_pipeline_from(
    mut state: PipelineState,
    index: &EntityIndex,
    config: &RunConfig,
    oracle: &dyn Oracle,
) -> Result<(SourceRepo, RunReport), DriverError> {
    while !state.unannotated_slots().is_empty()
        && state.iteration < config.max_iterations
        && state.stall_counter < config.stall_limit
    {
        state = run_iteration(&state, index, oracle, config)?;
    }

    // Whatever remains unresolved becomes `Any`.
    let leftovers = state.unannotated_slots();
    if !leftovers.is_empty() {
        let mut flush = IterationTrace {
            iteration: state.iteration,
            ..Default::default()
        };
        for slot in leftovers {
            fallback_slot(&mut state, &slot);
            flush.slots_fallback.push(slot.text());
        }
        state.trace.push(flush);
    }

    // Conflict-free guarantee: the final working copy must be clean. If a
    // late interaction between batches surfaces, demote the culprits to
    // `Any` until the checker is silent.
    let mut final_diags;
    loop {
        let working = apply_annotations(&state.base_repo, &state.applied)?;
        final_diags = check_working_copy(&working, &config.checker)?;
        if final_diags.is_empty() {
            break;
        }
        let working_index = crate::frontend::extract_entities(&working);
        let applied_meta: Vec<AppliedSlot> = state
            .applied
            .keys()
            .filter_map(|slot| {
                working_index.get(&slot.entity).map(|e| AppliedSlot {
                    slot: slot.clone(),
                    file: e.defining_span.file.clone(),
                    line: e.defining_span.start_line,
                })
            })
            .collect();
        let report = attribute_conflicts(&final_diags, &applied_meta, &working_index);
        let mut demoted = false;
        for slot in &report.culprit_slots {
            if state
                .applied
                .get(slot)
                .map(|t| t != "Any")
                .unwrap_or(false)
            {
                fallback_slot(&mut state, slot);
                demoted = true;
            }
        }
        if !demoted {
            break; // nothing left to demote; report the residue honestly
        }
    }

    let annotated = apply_annotations(&state.base_repo, &state.applied)?;
    let report = RunReport::from_state(&state, index, &final_diags);
    Ok((annotated, report))
}
