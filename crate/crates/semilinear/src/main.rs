fn main() {
    std::process::exit(semilinear::cli::run(std::env::args_os()));
}
