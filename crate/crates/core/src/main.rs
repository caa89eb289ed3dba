fn main() {
    std::process::exit(jamcut::cli::run(std::env::args_os()));
}
