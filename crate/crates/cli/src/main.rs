fn main() {
    std::process::exit(hetsense_cli::main_with(std::env::args_os()));
}
