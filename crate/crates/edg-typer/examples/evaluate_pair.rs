//! Score a predicted repository against ground truth, slot by slot.
//!
//! ```sh
//! cargo run --example evaluate_pair
//! ```

use edg_typer::frontend::SourceRepo;
use edg_typer::metrics::evaluate_repo_pair;

fn main() {
    let truth = "\
class Widget:
    def spin(self) -> int:
        return 1


def count(x: int = 0) -> int:
    return x


def tags() -> list[str]:
    return []
";
    // One wrong slot and one fallback out of five.
    let pred = truth
        .replace("def count(x: int = 0) -> int:", "def count(x: str = 0) -> int:")
        .replace("def tags() -> list[str]:", "def tags() -> Any:");

    let truth_repo = SourceRepo::from_files(vec![("m.py".to_string(), truth.to_string())]);
    let pred_repo = SourceRepo::from_files(vec![("m.py".to_string(), pred)]);

    let report = evaluate_repo_pair(&pred_repo, &truth_repo);
    print!("{}", report.render_table());
    println!("--- per slot ---");
    for r in &report.records {
        println!(
            "  {:<22} pred={:<12} truth={:<10} sim={:.2} exact={}",
            r.slot,
            r.predicted.as_deref().unwrap_or("-"),
            r.truth,
            r.sim,
            r.exact
        );
    }
}
