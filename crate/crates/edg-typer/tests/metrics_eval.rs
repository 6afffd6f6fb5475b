//! Metrics over real repos: evaluation round trips and introduced-error
//! counting against a prepared baseline.

mod common;

use common::{bundled_checker, fixture, test_config};
use edg_typer::driver::run_pipeline;
use edg_typer::frontend::{apply_annotations, load_repo, strip_annotations};
use edg_typer::inference::RuleOracle;
use edg_typer::metrics::{count_introduced_errors, evaluate_repo_pair};
use edg_typer::validation::prepare_baseline;

#[test]
fn annotated_output_scores_perfectly_against_itself() {
    let repo = load_repo(&fixture("flask_mini")).unwrap();
    let (annotated, _) = run_pipeline(repo, &test_config(), &RuleOracle).unwrap();
    let report = evaluate_repo_pair(&annotated, &annotated);
    assert!(!report.records.is_empty());
    assert_eq!(report.mean_type_sim, 1.0);
    assert_eq!(report.type_exact_rate, 1.0);
}

#[test]
fn strip_restore_scores_exact_on_all_slots() {
    let repo = load_repo(&fixture("flask_mini")).unwrap();
    let (truth, _) = run_pipeline(repo, &test_config(), &RuleOracle).unwrap();
    let (stripped, archive) = strip_annotations(&truth).unwrap();
    let restored = apply_annotations(&stripped, &archive.to_bindings()).unwrap();
    let report = evaluate_repo_pair(&restored, &truth);
    assert_eq!(report.type_exact_rate, 1.0, "{:#?}", report.records);
    assert!(report.records.iter().all(|r| r.exact));
}

#[test]
fn introduced_errors_zero_for_identical_repos() {
    let repo = load_repo(&fixture("baseline_errors")).unwrap();
    let checker = bundled_checker();
    let baseline = prepare_baseline(&repo, &checker).unwrap();
    let counts = count_introduced_errors(&baseline, &baseline, &checker).unwrap();
    assert!(counts.values().all(|&n| n == 0), "{counts:?}");
    // Grouping covers the tracked codes plus the other bucket.
    for code in ["arg-type", "assignment", "attr-defined", "return-value", "call-arg", "override", "var-annotated", "name-defined", "other"] {
        assert!(counts.contains_key(code), "missing bucket {code}");
    }
}

#[test]
fn injected_arg_type_conflict_is_counted() {
    let repo = load_repo(&fixture("conflicts/arg_type")).unwrap();
    let checker = bundled_checker();
    let baseline = prepare_baseline(&repo, &checker).unwrap();

    // Deliberately mis-annotate the parameter so call sites conflict.
    let mut bindings = std::collections::BTreeMap::new();
    bindings.insert(
        edg_typer::frontend::SlotId::param("m.scale", "factor"),
        "str".to_string(),
    );
    let bad = apply_annotations(&baseline, &bindings).unwrap();
    let counts = count_introduced_errors(&baseline, &bad, &checker).unwrap();
    assert_eq!(counts.get("arg-type"), Some(&1), "{counts:?}");
    let total: usize = counts.values().sum();
    assert_eq!(total, 1);
}

#[test]
fn evaluation_against_hand_written_truth() {
    // The pipeline output against a developer-annotated ground truth of
    // the same fixture; sim is high but bump() returns Any vs int.
    let truth_src = "\
REGISTRY: dict[str, int] = {\"runs\": 0}
COUNTER: int = 0


def bump() -> int:
    global COUNTER
    COUNTER = COUNTER + 1
    return COUNTER
";
    let pred_src = truth_src.replace("def bump() -> int:", "def bump() -> Any:");
    let truth = edg_typer::frontend::SourceRepo::from_files(vec![(
        "calc/state.py".to_string(),
        truth_src.to_string(),
    )]);
    let pred = edg_typer::frontend::SourceRepo::from_files(vec![(
        "calc/state.py".to_string(),
        pred_src,
    )]);
    let report = evaluate_repo_pair(&pred, &truth);
    assert_eq!(report.records.len(), 3);
    let bump = report
        .records
        .iter()
        .find(|r| r.slot == "calc.state.bump#return")
        .unwrap();
    assert!(!bump.exact);
    assert_eq!(bump.sim, 0.0); // Any scores zero against a concrete type
    assert!((report.type_exact_rate - 2.0 / 3.0).abs() < 1e-12);
}
