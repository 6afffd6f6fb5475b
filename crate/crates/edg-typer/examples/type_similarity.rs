//! Type normalization and attribute-set similarity scoring.
//!
//! ```sh
//! cargo run --example type_similarity
//! ```

use edg_typer::metrics::{normalize_type, type_exact, type_sim, AttrCatalog};

fn main() {
    let catalog = AttrCatalog::builtin();

    println!("canonical forms:");
    for expr in [
        "Optional[List[int]]",
        "Union[str, int, str]",
        "int | None",
        "typing.Dict[str, int]",
        "Callable[[int, str], bool]",
    ] {
        let n = normalize_type(expr).expect("parses");
        println!("  {expr:<28} => {}", n.text);
    }

    println!("\nsimilarity (Jaccard over supported attributes):");
    for (a, b) in [
        ("int", "int"),
        ("int", "float"),
        ("int", "str"),
        ("list[int]", "list[str]"),
        ("list[int]", "Sequence[int]"),
        ("Optional[int]", "int"),
        ("Any", "int"),
    ] {
        let (na, nb) = (normalize_type(a).unwrap(), normalize_type(b).unwrap());
        println!(
            "  sim({a:<14}, {b:<14}) = {:.3}   exact = {}",
            type_sim(&na, &nb, &catalog),
            type_exact(&na, &nb)
        );
    }
}
