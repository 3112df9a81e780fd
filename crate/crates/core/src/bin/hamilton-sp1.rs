fn main() {
    std::process::exit(hamilton_sp1::cli::main_with_args(std::env::args_os()));
}
