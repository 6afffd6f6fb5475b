//! Type-accuracy metrics: attribute-set similarity (Jaccard over the
//! methods and operations a type supports), exact-match over canonical
//! forms, repository-pair evaluation, and introduced-error counting.

mod catalog;
mod evaluate;
mod score;

pub use catalog::AttrCatalog;
pub use evaluate::{
    count_introduced_errors, evaluate_repo_pair, EvalReport, SlotRecord, TypeCategory,
};
pub use score::{type_exact, type_sim};

pub use crate::types::{normalize_type, NormalizedType};
