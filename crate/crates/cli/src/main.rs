fn main() {
    std::process::exit(polaron_cli::run(std::env::args_os()));
}
