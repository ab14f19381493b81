fn main() {
    std::process::exit(forge_cli::main_with(std::env::args_os().collect()));
}
