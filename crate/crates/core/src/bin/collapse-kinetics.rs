fn main() {
    std::process::exit(collapse_kinetics::cli::main_with_args(std::env::args_os()));
}
