fn main() {
    std::process::exit(prestrain::cli::main_with_args(std::env::args_os()));
}
