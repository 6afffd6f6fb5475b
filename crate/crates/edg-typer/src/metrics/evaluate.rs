use super::catalog::AttrCatalog;
use super::score::{type_exact, type_sim};
use crate::frontend::{extract_entities, EntityKind, SourceRepo};
use crate::types::normalize_type;
use crate::validation::{run_checker, CheckerConfig, ValidationError};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Table rows tracked individually when counting introduced errors; all
/// remaining codes fall into the `other` bucket.
pub const TRACKED_ERROR_CODES: &[&str] = &[
    "arg-type",
    "assignment",
    "attr-defined",
    "return-value",
    "call-arg",
    "override",
    "var-annotated",
    "name-defined",
];

const CONTAINER_HEADS: &[&str] = &[
    "list", "dict", "set", "frozenset", "tuple", "deque", "defaultdict", "OrderedDict", "Counter",
    "Sequence", "MutableSequence", "Mapping", "MutableMapping", "MutableSet", "Iterable",
    "Iterator", "Generator", "AsyncGenerator", "AsyncIterator", "AsyncIterable",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TypeCategory {
    Basic,
    Container,
    Union,
    UserDefined,
    Other,
}

impl TypeCategory {
    pub fn label(&self) -> &'static str {
        match self {
            TypeCategory::Basic => "basic",
            TypeCategory::Container => "container",
            TypeCategory::Union => "union",
            TypeCategory::UserDefined => "user_defined",
            TypeCategory::Other => "other",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SlotRecord {
    pub slot: String,
    pub predicted: Option<String>,
    pub truth: String,
    pub sim: f64,
    pub exact: bool,
    pub category: TypeCategory,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CategoryAggregate {
    pub count: usize,
    pub mean_sim: f64,
    pub exact_rate: f64,
}

/// Per-slot scores plus aggregates, recomputable from the records.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub records: Vec<SlotRecord>,
    pub mean_type_sim: f64,
    pub type_exact_rate: f64,
    pub per_category: BTreeMap<String, CategoryAggregate>,
    /// Introduced checker errors per code (filled by
    /// [`count_introduced_errors`], empty otherwise).
    pub introduced_errors: BTreeMap<String, usize>,
    /// Truth slots with no matching slot in the prediction.
    pub orphan_truth_slots: Vec<String>,
    /// Annotated prediction slots with no matching truth slot.
    pub orphan_pred_slots: Vec<String>,
    /// Heads absent from the attribute catalog (scored over empty sets).
    pub unknown_heads: Vec<String>,
}

impl EvalReport {
    pub fn has_universe_mismatch(&self) -> bool {
        !self.orphan_truth_slots.is_empty() || !self.orphan_pred_slots.is_empty()
    }

    /// Human-readable summary table.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "slots scored: {}\nmean TypeSim:  {:.2}\nTypeExact:     {:.2}\n",
            self.records.len(),
            self.mean_type_sim,
            self.type_exact_rate
        ));
        out.push_str("category      count  sim   exact\n");
        for (cat, agg) in &self.per_category {
            out.push_str(&format!(
                "{:<13} {:>5}  {:.2}  {:.2}\n",
                cat, agg.count, agg.mean_sim, agg.exact_rate
            ));
        }
        if !self.introduced_errors.is_empty() {
            let total: usize = self.introduced_errors.values().sum();
            out.push_str(&format!("introduced errors: {total}\n"));
            for (code, n) in &self.introduced_errors {
                if *n > 0 {
                    out.push_str(&format!("  {code}: {n}\n"));
                }
            }
        }
        if self.has_universe_mismatch() {
            out.push_str(&format!(
                "warning: slot universe mismatch ({} truth orphans, {} prediction orphans)\n",
                self.orphan_truth_slots.len(),
                self.orphan_pred_slots.len()
            ));
        }
        out
    }

    /// CSV rendering of the per-category breakdown.
    pub fn category_csv(&self) -> String {
        let mut out = String::from("category,count,mean_sim,exact_rate\n");
        for (cat, agg) in &self.per_category {
            out.push_str(&format!(
                "{},{},{:.4},{:.4}\n",
                cat, agg.count, agg.mean_sim, agg.exact_rate
            ));
        }
        out
    }
}

/// Score a predicted repo against a ground-truth repo slot by slot.
///
/// Slots are matched by id; orphans on either side are reported and the
/// intersection is scored. Truth slots lacking annotations are out of the
/// universe.
pub fn evaluate_repo_pair(pred: &SourceRepo, truth: &SourceRepo) -> EvalReport {
    let pred_index = extract_entities(pred);
    let truth_index = extract_entities(truth);
    let catalog = AttrCatalog::builtin().with_user_classes(&truth_index);

    let user_heads: Vec<String> = truth_index
        .iter()
        .filter(|(_, e)| e.kind == EntityKind::Class)
        .map(|(id, _)| id.basename().to_string())
        .collect();

    let pred_slots: BTreeMap<String, Option<String>> = pred_index
        .all_slots()
        .map(|s| (s.id.text(), s.annotation.clone()))
        .collect();

    let mut records = Vec::new();
    let mut orphan_truth = Vec::new();
    let mut unknown_heads = std::collections::BTreeSet::new();

    let mut truth_keys = std::collections::BTreeSet::new();
    for slot in truth_index.all_slots() {
        let key = slot.id.text();
        truth_keys.insert(key.clone());
        let Some(truth_ann) = &slot.annotation else {
            continue;
        };
        let Some(pred_ann) = pred_slots.get(&key) else {
            orphan_truth.push(key);
            continue;
        };

        let truth_norm = match normalize_type(truth_ann) {
            Ok(t) => t,
            Err(_) => continue,
        };
        if !catalog.is_known_head(truth_norm.head()) && !truth_norm.is_union() {
            unknown_heads.insert(truth_norm.head().to_string());
        }
        let category = categorize(&truth_norm, &user_heads);

        let (sim, exact, predicted) = match pred_ann {
            Some(p) => match normalize_type(p) {
                Ok(pred_norm) => (
                    type_sim(&pred_norm, &truth_norm, &catalog),
                    type_exact(&pred_norm, &truth_norm),
                    Some(p.clone()),
                ),
                Err(_) => (0.0, false, Some(p.clone())),
            },
            None => (0.0, false, None),
        };
        records.push(SlotRecord {
            slot: key,
            predicted,
            truth: truth_ann.clone(),
            sim,
            exact,
            category,
        });
    }

    let orphan_pred: Vec<String> = pred_slots
        .iter()
        .filter(|(k, ann)| ann.is_some() && !truth_keys.contains(*k))
        .map(|(k, _)| k.clone())
        .collect();

    let scored = records.len().max(1);
    let mean_type_sim = records.iter().map(|r| r.sim).sum::<f64>() / scored as f64;
    let type_exact_rate =
        records.iter().filter(|r| r.exact).count() as f64 / scored as f64;

    let mut per_category: BTreeMap<String, CategoryAggregate> = BTreeMap::new();
    for cat in [
        TypeCategory::Basic,
        TypeCategory::Container,
        TypeCategory::Union,
        TypeCategory::UserDefined,
        TypeCategory::Other,
    ] {
        let group: Vec<&SlotRecord> = records.iter().filter(|r| r.category == cat).collect();
        if group.is_empty() {
            continue;
        }
        per_category.insert(
            cat.label().to_string(),
            CategoryAggregate {
                count: group.len(),
                mean_sim: group.iter().map(|r| r.sim).sum::<f64>() / group.len() as f64,
                exact_rate: group.iter().filter(|r| r.exact).count() as f64
                    / group.len() as f64,
            },
        );
    }

    EvalReport {
        records,
        mean_type_sim,
        type_exact_rate,
        per_category,
        introduced_errors: BTreeMap::new(),
        orphan_truth_slots: orphan_truth,
        orphan_pred_slots: orphan_pred,
        unknown_heads: unknown_heads.into_iter().collect(),
    }
}

fn categorize(t: &crate::types::NormalizedType, user_heads: &[String]) -> TypeCategory {
    if t.is_union() {
        return TypeCategory::Union;
    }
    let head = t.head();
    let no_args = matches!(&t.node, crate::types::TypeNode::Named { args, .. } if args.is_empty());
    if no_args && matches!(head, "int" | "float" | "str" | "bytes" | "None") {
        return TypeCategory::Basic;
    }
    if CONTAINER_HEADS.contains(&head) {
        return TypeCategory::Container;
    }
    if user_heads.iter().any(|h| h == head) {
        return TypeCategory::UserDefined;
    }
    TypeCategory::Other
}

/// Count checker errors the annotations introduced relative to a prepared
/// baseline, grouped per tracked code plus an `other` bucket.
///
/// Both repos are checked with the refinement exclusions; baseline counts
/// (zero for a properly prepared baseline) are subtracted per code.
pub fn count_introduced_errors(
    baseline: &SourceRepo,
    annotated: &SourceRepo,
    checker: &CheckerConfig,
) -> Result<BTreeMap<String, usize>, ValidationError> {
    let count = |repo: &SourceRepo| -> Result<BTreeMap<String, usize>, ValidationError> {
        let dir = tempfile::tempdir().map_err(ValidationError::Workspace)?;
        repo.write_to_dir(dir.path())
            .map_err(|e| ValidationError::WorkingCopy(e.to_string()))?;
        let diags = run_checker(dir.path(), checker)?;
        let mut per_code: BTreeMap<String, usize> = BTreeMap::new();
        for d in diags {
            let code = if TRACKED_ERROR_CODES.contains(&d.error_code.as_str()) {
                d.error_code.clone()
            } else {
                "other".to_string()
            };
            *per_code.entry(code).or_insert(0) += 1;
        }
        Ok(per_code)
    };

    let base = count(baseline)?;
    let anno = count(annotated)?;

    let mut out: BTreeMap<String, usize> = TRACKED_ERROR_CODES
        .iter()
        .map(|c| (c.to_string(), 0))
        .collect();
    out.insert("other".to_string(), 0);
    for (code, n) in anno {
        let b = base.get(&code).copied().unwrap_or(0);
        *out.get_mut(&code).unwrap() = n.saturating_sub(b);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn repo(files: &[(&str, &str)]) -> SourceRepo {
        SourceRepo::from_files(
            files
                .iter()
                .map(|(p, t)| (p.to_string(), t.to_string()))
                .collect(),
        )
    }

    const ANNOTATED: &str = "class Widget:\n    def spin(self) -> int:\n        return 1\n\n\ndef count(x: int = 0) -> int:\n    return x\n\n\nNAMES: list[str] = []\n";

    #[test]
    fn self_evaluation_is_identity() {
        let r = repo(&[("m.py", ANNOTATED)]);
        let report = evaluate_repo_pair(&r, &r);
        assert!(!report.records.is_empty());
        assert_eq!(report.mean_type_sim, 1.0);
        assert_eq!(report.type_exact_rate, 1.0);
        assert!(report.records.iter().all(|r| r.exact && r.sim == 1.0));
        assert!(!report.has_universe_mismatch());
    }

    #[test]
    fn one_wrong_slot_out_of_ten() {
        let truth_src: String = (0..10)
            .map(|i| format!("def f{i}() -> int:\n    return {i}\n\n"))
            .collect();
        let pred_src = truth_src.replace("def f9() -> int", "def f9() -> str");
        let report = evaluate_repo_pair(&repo(&[("m.py", &pred_src)]), &repo(&[("m.py", &truth_src)]));
        // 10 return slots plus nothing else.
        assert_eq!(report.records.len(), 10);
        assert!((report.type_exact_rate - 0.9).abs() < 1e-12);
    }

    #[test]
    fn categories_assigned_from_truth() {
        let truth = "class Widget:\n    pass\n\n\ndef a() -> int:\n    return 1\n\n\ndef b() -> list[int]:\n    return []\n\n\ndef c() -> Union[int, str]:\n    return 1\n\n\ndef d() -> Widget:\n    return Widget()\n\n\ndef e() -> bool:\n    return True\n";
        let r = repo(&[("m.py", truth)]);
        let report = evaluate_repo_pair(&r, &r);
        let cats: BTreeMap<&str, usize> = report
            .per_category
            .iter()
            .map(|(k, v)| (k.as_str(), v.count))
            .collect();
        assert_eq!(cats.get("basic"), Some(&1));
        assert_eq!(cats.get("container"), Some(&1));
        assert_eq!(cats.get("union"), Some(&1));
        assert_eq!(cats.get("user_defined"), Some(&1));
        assert_eq!(cats.get("other"), Some(&1)); // bool is not a basic type
    }

    #[test]
    fn orphans_reported_but_intersection_scored() {
        let truth = "def f() -> int:\n    return 1\n\n\ndef only_truth() -> str:\n    return 'a'\n";
        let pred = "def f() -> int:\n    return 1\n";
        let report = evaluate_repo_pair(&repo(&[("m.py", pred)]), &repo(&[("m.py", truth)]));
        assert!(report.has_universe_mismatch());
        assert_eq!(report.records.len(), 1);
        assert_eq!(report.type_exact_rate, 1.0);
    }
}
