fn main() {
    std::process::exit(circuitgraph::cli::run(std::env::args_os()));
}
