fn main() { std::process::exit(fbmest::cli::main_with_args(std::env::args_os())) }
