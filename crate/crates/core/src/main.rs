fn main() {
    std::process::exit(carbospec::cli::main_with_args(std::env::args_os()));
}
