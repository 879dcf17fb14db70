fn main() {
    std::process::exit(ctbounds_cli::run_command(std::env::args_os()));
}
