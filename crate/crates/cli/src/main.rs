fn main() {
    std::process::exit(robust_split_cli::run_command(std::env::args_os()));
}
