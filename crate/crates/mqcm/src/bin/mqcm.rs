fn main() {
    std::process::exit(mqcm::cli::main_with_args(std::env::args_os()));
}
