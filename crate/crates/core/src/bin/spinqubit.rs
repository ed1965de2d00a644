fn main() {
    std::process::exit(spinqubit::cli::run(std::env::args_os()));
}
