use super::state::{IterationTrace, PipelineState};
use crate::frontend::{EntityIndex, SlotState};
use crate::validation::Diagnostic;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProgressPoint {
    pub iteration: usize,
    pub annotated_slots: usize,
    pub total_slots: usize,
}

/// Final run summary, serialized as JSON next to the annotated output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub iterations: usize,
    pub total_slots: usize,
    pub per_state: BTreeMap<String, usize>,
    /// Fraction of slots ending Validated or Fallback.
    pub coverage: f64,
    pub fallback_slots: Vec<String>,
    pub skipped_files: Vec<String>,
    /// Diagnostics remaining after the final checker run; empty when the
    /// conflict-free guarantee held.
    pub final_diagnostics: Vec<String>,
    pub trace: Vec<IterationTrace>,
}

impl RunReport {
    pub fn from_state(
        state: &PipelineState,
        index: &EntityIndex,
        final_diags: &[Diagnostic],
    ) -> Self {
        let mut per_state: BTreeMap<String, usize> = BTreeMap::new();
        let mut fallback_slots = Vec::new();
        for slot in state.slots.values() {
            let key = match slot.state {
                SlotState::Unannotated => "unannotated",
                SlotState::Inferred => "inferred",
                SlotState::Validated => "validated",
                SlotState::Fallback => "fallback",
            };
            *per_state.entry(key.to_string()).or_insert(0) += 1;
            if slot.state == SlotState::Fallback {
                fallback_slots.push(slot.id.text());
            }
        }
        let total = state.slots.len();
        let resolved = per_state.get("validated").copied().unwrap_or(0)
            + per_state.get("fallback").copied().unwrap_or(0);
        RunReport {
            schema_version: REPORT_SCHEMA_VERSION,
            iterations: state.iteration,
            total_slots: total,
            per_state,
            coverage: if total == 0 {
                1.0
            } else {
                resolved as f64 / total as f64
            },
            fallback_slots,
            skipped_files: index
                .skipped_files
                .iter()
                .map(|(p, e)| format!("{p}: {e}"))
                .collect(),
            final_diagnostics: final_diags.iter().map(|d| d.to_string()).collect(),
            trace: state.trace.clone(),
        }
    }

    pub fn conflict_free(&self) -> bool {
        self.final_diagnostics.is_empty()
    }

    pub fn fallback_count(&self) -> usize {
        self.fallback_slots.len()
    }

    /// Annotated-slot percentage per iteration, CSV, for progress curves.
    pub fn progress_csv(&self) -> String {
        let mut out = String::from("iteration,annotated_slots,total_slots,percent\n");
        let initially_validated = self.total_slots
            - self
                .trace
                .iter()
                .map(|t| t.slots_annotated.len() + t.slots_fallback.len())
                .sum::<usize>()
            - self.per_state.get("unannotated").copied().unwrap_or(0)
            - self.per_state.get("inferred").copied().unwrap_or(0);
        let mut annotated = initially_validated;
        for t in &self.trace {
            annotated += t.slots_annotated.len() + t.slots_fallback.len();
            let pct = if self.total_slots == 0 {
                100.0
            } else {
                annotated as f64 * 100.0 / self.total_slots as f64
            };
            out.push_str(&format!(
                "{},{},{},{:.1}\n",
                t.iteration, annotated, self.total_slots, pct
            ));
        }
        out
    }
}
