use super::catalog::AttrCatalog;
use crate::types::NormalizedType;

/// Jaccard similarity of the attribute sets of two types.
///
/// When both attribute sets are empty (e.g. `Any` vs `Any`, or two
/// unknown heads), the score is 1.0 exactly when the canonical forms are
/// equal and 0.0 otherwise.
pub fn type_sim(pred: &NormalizedType, truth: &NormalizedType, catalog: &AttrCatalog) -> f64 {
    let a = catalog.attrs_of(pred);
    let b = catalog.attrs_of(truth);
    if a.is_empty() && b.is_empty() {
        return if pred.text == truth.text { 1.0 } else { 0.0 };
    }
    let inter = a.intersection(&b).count();
    let union = a.union(&b).count();
    inter as f64 / union as f64
}

/// Exact nominal match: equality of canonical forms.
pub fn type_exact(pred: &NormalizedType, truth: &NormalizedType) -> bool {
    pred.text == truth.text
}
