fn main() {
    std::process::exit(neclust::cli::run(std::env::args_os()));
}
