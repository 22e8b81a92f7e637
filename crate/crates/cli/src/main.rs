fn main() {
    std::process::exit(superamp_cli::main_with(std::env::args_os()));
}
