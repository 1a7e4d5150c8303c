fn main() {
    std::process::exit(hypergrid::cli::run(std::env::args_os()));
}
