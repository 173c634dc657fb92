fn main() {
    std::process::exit(lpdist_cli::main_with_args(std::env::args().collect()));
}
