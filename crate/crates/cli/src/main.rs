fn main() {
    std::process::exit(mipt_cli::main_with_args(std::env::args_os()));
}
