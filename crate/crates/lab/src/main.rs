fn main() {
    std::process::exit(mlsi_lab::cli::main_with_args(std::env::args_os()));
}
