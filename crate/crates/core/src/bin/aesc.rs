fn main() {
    std::process::exit(aesc::cli::main_with_args(std::env::args_os()));
}
