fn main() {
    std::process::exit(prsim::cli::run(std::env::args_os()));
}
