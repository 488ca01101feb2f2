fn main() {
    std::process::exit(morphforge_cli::run(std::env::args_os()));
}
