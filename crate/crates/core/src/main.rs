fn main() {
    std::process::exit(funcband::cli::run(std::env::args_os()));
}
