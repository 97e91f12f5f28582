fn main() {
    std::process::exit(trustflow::cli::run(std::env::args().collect()));
}
