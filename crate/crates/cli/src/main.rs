fn main() {
    std::process::exit(activecircle_cli::run_cli(std::env::args_os()));
}
