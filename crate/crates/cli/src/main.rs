fn main() {
    std::process::exit(pisr_cli::main_with_args(std::env::args_os()));
}
