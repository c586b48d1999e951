fn main() {
    std::process::exit(heun_core::cli::main_with_args(std::env::args_os()));
}
