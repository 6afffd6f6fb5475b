//! Span-based annotation stripping and archive-driven restoration.
//!
//! ```sh
//! cargo run --example strip_and_restore
//! ```

use edg_typer::frontend::{apply_annotations, strip_annotations, SourceRepo};

fn main() {
    let source = "\
GREETING: str = 'hi'


def scale(x: int = 2) -> int:
    \"\"\"Double a value.

    :type x: int
    :rtype: int
    \"\"\"
    return x * 2
";
    let repo = SourceRepo::from_files(vec![("m.py".to_string(), source.to_string())]);

    let (stripped, archive) = strip_annotations(&repo).expect("strips");
    println!("--- stripped ---\n{}", stripped.files[0].text);
    println!("--- archive ---");
    for entry in &archive.entries {
        println!("  {} : {}", entry.slot, entry.type_expr);
    }

    let restored = apply_annotations(&stripped, &archive.to_bindings()).expect("applies");
    println!("--- restored ---\n{}", restored.files[0].text);
    // Annotations are back byte-for-byte; only the :type/:rtype docstring
    // lines stay removed.
}
