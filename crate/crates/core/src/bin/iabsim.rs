fn main() {
    std::process::exit(mmwave_iab::cli::main_with_args(std::env::args_os()));
}
