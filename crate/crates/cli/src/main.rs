fn main() {
    std::process::exit(fk_hetero_cli::run_command(std::env::args_os()));
}
