use crate::edg::EntityDependencyGraph;
use crate::frontend::{extract_entities, EntityIndex, SlotId, SourceRepo, TypeSlot};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const STATE_SCHEMA_VERSION: u32 = 1;

/// Everything the pipeline mutates between iterations. The entity index
/// is derived from `base_repo` and rebuilt on load rather than stored.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineState {
    pub schema_version: u32,
    /// The input repository; pre-existing annotations stay in its text.
    pub base_repo: SourceRepo,
    pub edg: EntityDependencyGraph,
    pub slots: BTreeMap<SlotId, TypeSlot>,
    /// Tool-generated bindings currently applied to the working copy.
    pub applied: BTreeMap<SlotId, String>,
    pub iteration: usize,
    pub stall_counter: usize,
    /// Feedback queued for a cluster's next inference attempt.
    pub feedback: BTreeMap<String, Vec<String>>,
    /// Clusters whose probe came back empty, keyed to the EDG version the
    /// probe saw; a version bump invalidates the entry.
    pub probe_clean: BTreeMap<String, u64>,
    pub trace: Vec<IterationTrace>,
}

impl PipelineState {
    /// Initial state for a repository: entities extracted, references
    /// resolved, pattern edges built, developer annotations validated.
    pub fn new(repo: SourceRepo) -> (Self, EntityIndex) {
        let index = extract_entities(&repo);
        let refs = crate::frontend::resolve_statement_refs(&repo, &index);
        let edg = crate::edg::build_edg(&index, &refs);
        let slots: BTreeMap<SlotId, TypeSlot> = index
            .all_slots()
            .map(|s| (s.id.clone(), s.clone()))
            .collect();
        (
            PipelineState {
                schema_version: STATE_SCHEMA_VERSION,
                base_repo: repo,
                edg,
                slots,
                applied: BTreeMap::new(),
                iteration: 0,
                stall_counter: 0,
                feedback: BTreeMap::new(),
                probe_clean: BTreeMap::new(),
                trace: Vec::new(),
            },
            index,
        )
    }

    pub fn rebuild_index(&self) -> EntityIndex {
        extract_entities(&self.base_repo)
    }

    pub fn unannotated_slots(&self) -> Vec<SlotId> {
        self.slots
            .values()
            .filter(|s| !s.is_annotated())
            .map(|s| s.id.clone())
            .collect()
    }
}

/// Append-only record of what one iteration did.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub iteration: usize,
    pub selected_clusters: Vec<String>,
    pub probed_edges_accepted: usize,
    pub slots_annotated: Vec<String>,
    pub slots_fallback: Vec<String>,
    pub conflicts: Vec<String>,
    pub resolutions: Vec<String>,
}
