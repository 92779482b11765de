fn main() {
    std::process::exit(memex_cli::run_cli(std::env::args_os()));
}
