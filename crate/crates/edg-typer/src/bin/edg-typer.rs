fn main() {
    std::process::exit(edg_typer::cli::run());
}
