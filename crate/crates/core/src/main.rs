fn main() {
    std::process::exit(hdcoint::cli::main_with_args(std::env::args().collect()));
}
