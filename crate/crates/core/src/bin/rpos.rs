fn main() {
    std::process::exit(rpos::cli::main_with_args(std::env::args_os()));
}
