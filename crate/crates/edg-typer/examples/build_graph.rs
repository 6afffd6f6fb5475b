//! Extract entities from a Python repo and print its dependency graph.
//!
//! ```sh
//! cargo run --example build_graph [path/to/repo]
//! ```

use edg_typer::edg::{build_edg, to_dot};
use edg_typer::frontend::{extract_entities, load_repo, resolve_statement_refs};
use std::path::PathBuf;

fn main() {
    let root = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| {
            PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/flask_mini")
        });

    let repo = load_repo(&root).expect("repository loads");
    let index = extract_entities(&repo);
    let refs = resolve_statement_refs(&repo, &index);
    let graph = build_edg(&index, &refs);

    println!(
        "# {} entities, {} pattern edges",
        index.len(),
        graph.edge_count()
    );
    print!("{}", to_dot(&graph, &index));
}
