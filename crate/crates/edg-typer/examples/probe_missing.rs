//! Co-evolution in one step: the oracle spots a dependency the pattern
//! extractor could not see, and the probe grounds it to a real entity.
//!
//! Mirrors the attribute-chain scenario: `ctx = _cv_request.get()` hides
//! `RequestContext._after_request_functions` behind an untyped local
//! until `_cv_request`'s annotation is known.
//!
//! ```sh
//! cargo run --example probe_missing
//! ```

use edg_typer::frontend::{extract_entities, load_repo, SlotId};
use edg_typer::inference::{
    build_context, probe_missing_dependencies, RuleOracle, DEFAULT_TOKEN_BUDGET,
};
use std::collections::BTreeMap;
use std::path::PathBuf;

fn main() {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/flask_mini");
    let repo = load_repo(&root).expect("fixture loads");
    let index = extract_entities(&repo);
    let refs = edg_typer::frontend::resolve_statement_refs(&repo, &index);
    let graph = edg_typer::edg::build_edg(&index, &refs);
    let dag = edg_typer::edg::condense_and_bound(&graph, 5);

    // Pretend the dependency variable is already annotated (it is, in the
    // fixture source) and build the context for the target function.
    let slots: BTreeMap<SlotId, _> = index.all_slots().map(|s| (s.id.clone(), s.clone())).collect();
    let cluster = dag
        .cluster_of(&"app.helpers.after_this_request".into())
        .expect("cluster exists");

    let ctx = build_context(cluster, &graph, &index, &slots, vec![], DEFAULT_TOKEN_BUDGET)
        .expect("context fits");
    println!("--- serialized context ---\n{}", ctx.serialized());

    let report = probe_missing_dependencies(&ctx, &RuleOracle, &index, &cluster.members)
        .expect("probe runs");
    println!("--- proposed edges ---");
    for edge in &report.proposed_edges {
        println!("  {} -> {}  ({:?}, {:?})", edge.from, edge.to, edge.kind, edge.origin);
    }
    if !report.unresolved_refs.is_empty() {
        println!("unresolved: {:?}", report.unresolved_refs);
    }
}
