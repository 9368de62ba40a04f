fn main() {
    std::process::exit(pharmlab::cli::main_with_args(std::env::args_os()));
}
