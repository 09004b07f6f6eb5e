fn main() {
    std::process::exit(mlid::cli::main_with_args(std::env::args_os().collect()));
}
