use super::condense::{ClusterDag, EntityCluster};
use crate::frontend::{SlotId, TypeSlot};
use std::collections::BTreeMap;

/// Clusters ready for inference this iteration: those containing at least
/// one unannotated slot whose dependency-successor clusters are all fully
/// annotated. Ordered by ascending size, then smallest member id.
pub fn select_targets<'a>(
    dag: &'a ClusterDag,
    slots: &BTreeMap<SlotId, TypeSlot>,
) -> Vec<&'a EntityCluster> {
    let fully_annotated: BTreeMap<&str, bool> = dag
        .clusters
        .iter()
        .map(|c| (c.cluster_id.as_str(), cluster_fully_annotated(c, slots)))
        .collect();

    let mut targets: Vec<&EntityCluster> = dag
        .clusters
        .iter()
        .filter(|c| {
            let has_unannotated = cluster_slots(c, slots).any(|s| !s.is_annotated());
            has_unannotated
                && dag
                    .successors(&c.cluster_id)
                    .all(|succ| *fully_annotated.get(succ).unwrap_or(&true))
        })
        .collect();
    targets.sort_by(|a, b| {
        (a.members.len(), &a.cluster_id).cmp(&(b.members.len(), &b.cluster_id))
    });
    targets
}

pub fn cluster_slots<'a>(
    cluster: &'a EntityCluster,
    slots: &'a BTreeMap<SlotId, TypeSlot>,
) -> impl Iterator<Item = &'a TypeSlot> {
    slots
        .values()
        .filter(move |s| cluster.members.contains(&s.id.entity))
}

/// All member slots are in state Inferred, Validated, or Fallback.
/// Clusters of slotless entities (classes) are vacuously annotated.
pub fn cluster_fully_annotated(
    cluster: &EntityCluster,
    slots: &BTreeMap<SlotId, TypeSlot>,
) -> bool {
    cluster_slots(cluster, slots).all(|s| s.is_annotated())
}
