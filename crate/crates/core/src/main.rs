fn main() {
    std::process::exit(laclab::cli::run(std::env::args_os()));
}
