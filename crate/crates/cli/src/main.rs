fn main() {
    std::process::exit(denserew_cli::main_with(std::env::args_os()));
}
