fn main() {
    std::process::exit(cspi::cli::main_with_args(std::env::args_os()));
}
