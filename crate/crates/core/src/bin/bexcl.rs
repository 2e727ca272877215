fn main() {
    std::process::exit(bernstein_exclusion::cli::run(std::env::args_os()));
}
