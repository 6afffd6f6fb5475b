//! Acceptance suite: one test per criterion, each printing a PASS line
//! once its assertions hold. Run with `cargo test --test acceptance`.

mod common;

use common::{bundled_checker, fixture, test_config, PoisonOracle, XorShift};
use edg_typer::driver::{
    checkpoint_load, checkpoint_save, run_iteration, run_pipeline, run_pipeline_from,
    PipelineState,
};
use edg_typer::edg::{
    condense_and_bound, merge_new_edges, select_targets, DependencyEdge, EdgeKind, EdgeOrigin,
    EntityDependencyGraph,
};
use edg_typer::frontend::{apply_annotations, load_repo, strip_annotations, EntityId, SlotId};
use edg_typer::inference::RuleOracle;
use edg_typer::metrics::{evaluate_repo_pair, normalize_type, type_exact, type_sim, AttrCatalog};
use edg_typer::validation::{prepare_baseline, run_checker};
use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

// ---------------------------------------------------------------- corpus

fn random_digraph(rng: &mut XorShift) -> (usize, Vec<(usize, usize)>) {
    let n = 2 + rng.below(49); // ≤ 50 nodes
    let m = rng.below(2 * n) + n / 2;
    let mut edges = BTreeSet::new();
    for _ in 0..m {
        let f = rng.below(n);
        let t = rng.below(n);
        if f != t {
            edges.insert((f, t));
        }
    }
    (n, edges.into_iter().collect())
}

fn graph_of(n: usize, edges: &[(usize, usize)]) -> (Vec<String>, EntityDependencyGraph) {
    let nodes: Vec<String> = (0..n).map(|i| format!("n{i:02}")).collect();
    let mut g = EntityDependencyGraph::with_nodes(nodes.iter().map(|s| EntityId(s.clone())));
    let probed: Vec<DependencyEdge> = edges
        .iter()
        .map(|(f, t)| DependencyEdge {
            from: EntityId(nodes[*f].clone()),
            to: EntityId(nodes[*t].clone()),
            kind: EdgeKind::Access,
            origin: EdgeOrigin::Pattern,
        })
        .collect();
    merge_new_edges(&mut g, probed);
    (nodes, g)
}

/// Brute-force mutual reachability via Floyd–Warshall closure.
#[allow(clippy::needless_range_loop)]
fn scc_oracle(n: usize, edges: &[(usize, usize)]) -> Vec<BTreeSet<usize>> {
    let mut reach = vec![vec![false; n]; n];
    for i in 0..n {
        reach[i][i] = true;
    }
    for (f, t) in edges {
        reach[*f][*t] = true;
    }
    for k in 0..n {
        for i in 0..n {
            if reach[i][k] {
                for j in 0..n {
                    if reach[k][j] {
                        reach[i][j] = true;
                    }
                }
            }
        }
    }
    let mut assigned = vec![false; n];
    let mut out = Vec::new();
    for i in 0..n {
        if assigned[i] {
            continue;
        }
        let mut class = BTreeSet::new();
        for j in 0..n {
            if reach[i][j] && reach[j][i] {
                class.insert(j);
                assigned[j] = true;
            }
        }
        out.push(class);
    }
    out.sort();
    out
}

fn kahn_acyclic(dag: &edg_typer::edg::ClusterDag) -> bool {
    let mut indeg: BTreeMap<&str, usize> = dag
        .clusters
        .iter()
        .map(|c| (c.cluster_id.as_str(), 0))
        .collect();
    for (_, to) in &dag.cluster_edges {
        *indeg.get_mut(to.as_str()).unwrap() += 1;
    }
    let mut queue: Vec<&str> = indeg
        .iter()
        .filter(|(_, d)| **d == 0)
        .map(|(k, _)| *k)
        .collect();
    let mut seen = 0;
    while let Some(c) = queue.pop() {
        seen += 1;
        for (from, to) in &dag.cluster_edges {
            if from == c {
                let d = indeg.get_mut(to.as_str()).unwrap();
                *d -= 1;
                if *d == 0 {
                    queue.push(to);
                }
            }
        }
    }
    seen == dag.clusters.len()
}

// ------------------------------------------------------------- criteria

#[test]
fn criterion_1_scc_oracle_equivalence() {
    let started = Instant::now();
    let mut rng = XorShift(0xace0_0001);
    for case in 0..1000 {
        let (n, edges) = random_digraph(&mut rng);
        let (nodes, g) = graph_of(n, &edges);
        // Bound at n: membership must equal raw SCCs exactly.
        let dag = condense_and_bound(&g, n.max(1));
        let pos: BTreeMap<&str, usize> =
            nodes.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let mut got: Vec<BTreeSet<usize>> = dag
            .clusters
            .iter()
            .map(|c| c.members.iter().map(|m| pos[m.as_str()]).collect())
            .collect();
        got.sort();
        let want = scc_oracle(n, &edges);
        assert_eq!(got, want, "case {case}: membership mismatch");
        assert!(kahn_acyclic(&dag), "case {case}: cyclic condensation");
    }
    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs() < 30,
        "corpus took {elapsed:?}, budget is 30s"
    );
    println!(
        "criterion 1: PASS — SCC membership equals reachability oracle on 1000 digraphs, all acyclic, in {elapsed:?}"
    );
}

#[test]
fn criterion_2_cluster_bound_and_conservation() {
    let mut rng = XorShift(0xace0_0002);
    for case in 0..1000 {
        let (n, mut edges) = random_digraph(&mut rng);
        // Force a large SCC: a Hamiltonian cycle.
        for i in 0..n {
            let j = (i + 1) % n;
            if i != j {
                edges.push((i, j));
            }
        }
        edges.sort();
        edges.dedup();
        let (nodes, g) = graph_of(n, &edges);
        let dag = condense_and_bound(&g, 5);

        for c in &dag.clusters {
            assert!(c.members.len() <= 5, "case {case}: cluster over bound");
        }
        let mut seen: BTreeSet<&str> = BTreeSet::new();
        for c in &dag.clusters {
            for m in &c.members {
                assert!(seen.insert(m.as_str()), "case {case}: node in two clusters");
            }
        }
        assert_eq!(seen.len(), nodes.len(), "case {case}: partition incomplete");

        let removed: BTreeSet<(String, String)> = dag
            .clusters
            .iter()
            .flat_map(|c| c.removed_internal_edges.iter())
            .map(|e| (e.from.0.clone(), e.to.0.clone()))
            .collect();
        let cluster_of: BTreeMap<&str, &str> = dag
            .clusters
            .iter()
            .flat_map(|c| {
                c.members
                    .iter()
                    .map(move |m| (m.as_str(), c.cluster_id.as_str()))
            })
            .collect();
        for e in g.edges() {
            let internal = cluster_of[e.from.as_str()] == cluster_of[e.to.as_str()]
                && !removed.contains(&(e.from.0.clone(), e.to.0.clone()));
            let crossing = dag.cluster_edges.contains(&(
                cluster_of[e.from.as_str()].to_string(),
                cluster_of[e.to.as_str()].to_string(),
            ));
            let was_removed = removed.contains(&(e.from.0.clone(), e.to.0.clone()));
            assert!(
                internal || crossing || was_removed,
                "case {case}: edge {} -> {} unaccounted",
                e.from,
                e.to
            );
        }
        assert!(kahn_acyclic(&dag), "case {case}: cyclic after decomposition");
    }
    println!(
        "criterion 2: PASS — bound ≤5, exact partition, and edge conservation on 1000 forced-SCC digraphs"
    );
}

#[test]
fn criterion_3_wave_validity() {
    let cfg = test_config();
    let mut waves = 0usize;
    for name in ["flask_mini", "chain_calc", "textkit"] {
        let repo = load_repo(&fixture(name)).unwrap();
        let (mut state, index) = PipelineState::new(repo);
        while !state.unannotated_slots().is_empty()
            && state.iteration < cfg.max_iterations
            && state.stall_counter < cfg.stall_limit
        {
            // Assert readiness at selection time, directly by definition.
            let dag = condense_and_bound(&state.edg, cfg.cluster_bound);
            for target in select_targets(&dag, &state.slots) {
                for succ_id in dag.cluster_edges.iter().filter(|(f, _)| *f == target.cluster_id) {
                    let succ = dag.cluster(&succ_id.1).unwrap();
                    let ready = state
                        .slots
                        .values()
                        .filter(|s| succ.members.contains(&s.id.entity))
                        .all(|s| s.is_annotated());
                    assert!(
                        ready,
                        "{name}: cluster {} selected while successor {} unannotated",
                        target.cluster_id, succ.cluster_id
                    );
                }
                waves += 1;
            }
            state = run_iteration(&state, &index, &RuleOracle, &cfg).unwrap();
        }
    }
    println!("criterion 3: PASS — {waves} selected clusters all had fully annotated dependency successors");
}

#[test]
fn criterion_4_conflict_free_guarantee() {
    let started = Instant::now();
    for name in ["flask_mini", "chain_calc", "textkit"] {
        let fixture_start = Instant::now();
        let repo = load_repo(&fixture(name)).unwrap();
        let cfg = test_config();
        let (annotated, report) = run_pipeline(repo, &cfg, &RuleOracle).unwrap();
        assert!(
            report.iterations <= 50,
            "{name}: {} iterations",
            report.iterations
        );
        assert!(
            report.conflict_free(),
            "{name}: {:?}",
            report.final_diagnostics
        );
        assert_eq!(report.coverage, 1.0, "{name}: incomplete coverage");

        let dir = tempfile::tempdir().unwrap();
        annotated.write_to_dir(dir.path()).unwrap();
        let diags = run_checker(dir.path(), &bundled_checker()).unwrap();
        assert!(diags.is_empty(), "{name}: {diags:?}");
        let took = fixture_start.elapsed();
        assert!(took.as_secs() < 120, "{name} took {took:?}, budget 2min");
    }
    println!(
        "criterion 4: PASS — 3 fixture repos terminate ≤50 iterations with 0 tracked-category errors in {:?}",
        started.elapsed()
    );
}

#[test]
fn criterion_5_backtracking_repair() {
    let cfg = test_config();
    struct Case {
        fixture: &'static str,
        poison: Vec<(&'static str, &'static str, u8)>,
        mis_annotated: &'static str,
        expect_fallback: bool,
    }
    let cases = vec![
        Case {
            fixture: "conflicts/arg_type",
            poison: vec![("m.scale#param(factor)", "str", 1), ("m.scale#return", "str", 1)],
            mis_annotated: "m.scale#param(factor)",
            expect_fallback: false,
        },
        Case {
            fixture: "conflicts/override",
            poison: vec![("m.Child.describe#param(width)", "int", 1)],
            mis_annotated: "m.Child.describe#param(width)",
            expect_fallback: false,
        },
        Case {
            fixture: "conflicts/return_value",
            poison: vec![("m.total#return", "str", 1)],
            mis_annotated: "m.total#return",
            expect_fallback: false,
        },
        Case {
            fixture: "conflicts/call_arg",
            poison: vec![("m.process#var", "Callable[[str], str]", 1)],
            mis_annotated: "m.process#var",
            expect_fallback: false,
        },
        Case {
            fixture: "conflicts/name_defined",
            poison: vec![("m.configure#param(mode)", "TurboMode", u8::MAX)],
            mis_annotated: "m.configure#param(mode)",
            expect_fallback: true,
        },
    ];

    let mut attributed = 0;
    for case in &cases {
        let oracle = PoisonOracle::new(&case.poison);
        let repo = load_repo(&fixture(case.fixture)).unwrap();
        let (mut state, index) = PipelineState::new(repo);
        while !state.unannotated_slots().is_empty()
            && state.iteration < cfg.max_iterations
            && state.stall_counter < cfg.stall_limit
        {
            state = run_iteration(&state, &index, &oracle, &cfg).unwrap();
        }

        // Attribution named the deliberately mis-annotated slot.
        let conflicts: Vec<String> = state.trace.iter().flat_map(|t| t.conflicts.clone()).collect();
        assert!(
            conflicts.iter().any(|c| c.contains(case.mis_annotated)),
            "{}: attribution missed {} in {conflicts:?}",
            case.fixture,
            case.mis_annotated
        );
        attributed += 1;

        // No slot exceeds its attempt bound.
        for slot in state.slots.values() {
            assert!(
                slot.attempts <= cfg.attempt_bound,
                "{}: {} took {} attempts",
                case.fixture,
                slot.id,
                slot.attempts
            );
        }

        // Post-resolution: pipeline completes conflict-free.
        let (annotated, report) = run_pipeline_from(state, &index, &cfg, &oracle).unwrap();
        assert!(
            report.conflict_free(),
            "{}: {:?}",
            case.fixture,
            report.final_diagnostics
        );
        let dir = tempfile::tempdir().unwrap();
        annotated.write_to_dir(dir.path()).unwrap();
        assert!(run_checker(dir.path(), &bundled_checker()).unwrap().is_empty());

        if case.expect_fallback {
            let slot = SlotId::parse(case.mis_annotated).unwrap();
            assert!(
                report.fallback_slots.contains(&slot.text()),
                "{}: persistent conflict did not fall back to Any",
                case.fixture
            );
        }
    }
    println!(
        "criterion 5: PASS — attribution named the mis-annotated slot in {attributed}/5 fixtures; checker clean after repair; attempts ≤3; persistent conflicts ended as Any"
    );
}

#[test]
fn criterion_6_metric_identity_and_round_trip() {
    // Self-evaluation identity (exact, tolerance 0).
    let repo = load_repo(&fixture("flask_mini")).unwrap();
    let (truth, _) = run_pipeline(repo, &test_config(), &RuleOracle).unwrap();
    let self_report = evaluate_repo_pair(&truth, &truth);
    assert!(!self_report.records.is_empty());
    assert_eq!(self_report.mean_type_sim, 1.0);
    assert_eq!(self_report.type_exact_rate, 1.0);

    // Strip, restore from the archive, and compare: exact on all slots.
    let (stripped, archive) = strip_annotations(&truth).unwrap();
    let restored = apply_annotations(&stripped, &archive.to_bindings()).unwrap();
    let report = evaluate_repo_pair(&restored, &truth);
    assert_eq!(report.type_exact_rate, 1.0);
    assert!(report.records.iter().all(|r| r.exact && r.sim == 1.0));
    println!(
        "criterion 6: PASS — self-evaluation 1.00/1.00 and strip→restore TypeExact 1.00 on {} slots",
        report.records.len()
    );
}

#[test]
fn criterion_7_metric_properties_against_set_oracle() {
    // Independent oracle: parse the committed catalog directly and do the
    // set arithmetic here, separately from AttrCatalog.
    let raw: serde_json::Value = serde_json::from_str(include_str!(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/assets/builtin_attrs.json"
    )))
    .unwrap();
    let table: BTreeMap<String, BTreeSet<String>> = raw["types"]
        .as_object()
        .unwrap()
        .iter()
        .map(|(k, v)| {
            (
                k.clone(),
                v.as_array()
                    .unwrap()
                    .iter()
                    .map(|s| s.as_str().unwrap().to_string())
                    .collect(),
            )
        })
        .collect();

    fn oracle_attrs(
        expr: &str,
        table: &BTreeMap<String, BTreeSet<String>>,
    ) -> BTreeSet<String> {
        // Recognizes the shapes the generator below produces.
        if expr == "Any" {
            return BTreeSet::new();
        }
        if let Some(inner) = expr.strip_prefix("Optional[").and_then(|s| s.strip_suffix(']')) {
            let a = oracle_attrs(inner, table);
            let none = table.get("None").cloned().unwrap_or_default();
            return a.intersection(&none).cloned().collect();
        }
        if let Some(inner) = expr.strip_prefix("Union[").and_then(|s| s.strip_suffix(']')) {
            let mut members = inner.split(", ");
            let first = oracle_attrs(members.next().unwrap(), table);
            return members.fold(first, |acc, m| {
                acc.intersection(&oracle_attrs(m, table)).cloned().collect()
            });
        }
        if let Some(open) = expr.find('[') {
            return oracle_attrs(&expr[..open], table);
        }
        table.get(expr).cloned().unwrap_or_default()
    }

    let heads = [
        "int", "float", "str", "bytes", "bool", "list", "dict", "set", "frozenset", "tuple",
        "range", "None", "Iterable", "Sequence", "Mapping", "Any",
    ];
    let mut rng = XorShift(0xace0_0007);
    let gen_expr = |rng: &mut XorShift| -> String {
        match rng.below(5) {
            0 => format!("Optional[{}]", heads[rng.below(heads.len())]),
            1 => format!(
                "Union[{}, {}]",
                heads[rng.below(heads.len())],
                heads[rng.below(heads.len())]
            ),
            2 => format!("list[{}]", heads[rng.below(heads.len())]),
            3 => format!("dict[str, {}]", heads[rng.below(heads.len())]),
            _ => heads[rng.below(heads.len())].to_string(),
        }
    };

    let catalog = AttrCatalog::builtin();
    for _ in 0..500 {
        let a_expr = gen_expr(&mut rng);
        let b_expr = gen_expr(&mut rng);
        let a = normalize_type(&a_expr).unwrap();
        let b = normalize_type(&b_expr).unwrap();

        let ab = type_sim(&a, &b, &catalog);
        let ba = type_sim(&b, &a, &catalog);
        assert_eq!(ab, ba, "symmetry broke for {a_expr} vs {b_expr}");
        assert!((0.0..=1.0).contains(&ab));
        if type_exact(&a, &b) {
            assert_eq!(ab, 1.0, "exact pair {a_expr}/{b_expr} not sim 1");
        }

        // Normalization idempotence.
        let re = normalize_type(&a.text).unwrap();
        assert_eq!(re.text, a.text);

        // Exact equality with the independent set-arithmetic oracle.
        let oa = oracle_attrs(&a.text, &table);
        let ob = oracle_attrs(&b.text, &table);
        let expected = if oa.is_empty() && ob.is_empty() {
            if a.text == b.text {
                1.0
            } else {
                0.0
            }
        } else {
            oa.intersection(&ob).count() as f64 / oa.union(&ob).count() as f64
        };
        assert_eq!(ab, expected, "oracle mismatch for {} vs {}", a.text, b.text);
    }
    println!("criterion 7: PASS — 500 random pairs: symmetry, range, exact⟹1, idempotence, and oracle equality all exact");
}

#[test]
fn criterion_8_baseline_preparation() {
    let repo = load_repo(&fixture("baseline_errors")).unwrap();
    let checker = bundled_checker();
    let baseline = prepare_baseline(&repo, &checker).unwrap();

    let suppressions: usize = baseline
        .files
        .iter()
        .map(|f| f.text.matches("# type: ignore").count())
        .sum();
    assert_eq!(suppressions, 3, "expected exactly 3 suppression comments");

    let dir = tempfile::tempdir().unwrap();
    baseline.write_to_dir(dir.path()).unwrap();
    assert!(run_checker(dir.path(), &checker).unwrap().is_empty());

    let again = prepare_baseline(&baseline, &checker).unwrap();
    assert_eq!(baseline.files, again.files, "re-run was not a no-op");
    println!("criterion 8: PASS — 3 inherent errors suppressed exactly once, checker-clean, idempotent");
}

#[test]
fn criterion_9_determinism_and_resumability() {
    let cfg = test_config();
    let run_once = || {
        let repo = load_repo(&fixture("flask_mini")).unwrap();
        let (annotated, report) = run_pipeline(repo, &cfg, &RuleOracle).unwrap();
        let files: Vec<(String, String)> = annotated
            .files
            .iter()
            .map(|f| (f.path.clone(), f.text.clone()))
            .collect();
        (files, serde_json::to_string(&report).unwrap())
    };
    let (files_a, report_a) = run_once();
    let (files_b, report_b) = run_once();
    assert_eq!(files_a, files_b, "outputs differ between runs");
    assert_eq!(report_a, report_b, "reports differ between runs");

    // Checkpoint at iteration k, resume, compare final reports.
    let repo = load_repo(&fixture("flask_mini")).unwrap();
    let (state0, index) = PipelineState::new(repo);
    let state1 = run_iteration(&state0, &index, &RuleOracle, &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ckpt.json");
    checkpoint_save(&state1, &path).unwrap();
    let resumed = checkpoint_load(&path).unwrap();
    let resumed_index = resumed.rebuild_index();
    let (_, resumed_report) = run_pipeline_from(resumed, &resumed_index, &cfg, &RuleOracle).unwrap();
    assert_eq!(
        report_a,
        serde_json::to_string(&resumed_report).unwrap(),
        "resumed run diverged from direct run"
    );

    // Verify byte-identical repos on a second fixture too.
    let double = |name: &str| {
        let repo = load_repo(&fixture(name)).unwrap();
        let (annotated, _) = run_pipeline(repo, &cfg, &RuleOracle).unwrap();
        annotated
            .files
            .iter()
            .map(|f| f.text.clone())
            .collect::<Vec<_>>()
    };
    assert_eq!(double("chain_calc"), double("chain_calc"));
    println!("criterion 9: PASS — byte-identical reruns and checkpoint-resume equals the uninterrupted run");
}
