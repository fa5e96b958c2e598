fn main() {
    std::process::exit(whitlab::cli::main_with_args(std::env::args().collect()));
}
