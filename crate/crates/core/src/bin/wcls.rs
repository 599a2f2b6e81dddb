fn main() {
    std::process::exit(wcls::cli::run(std::env::args_os()));
}
