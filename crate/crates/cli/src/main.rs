fn main() {
    std::process::exit(facehall_cli::run(std::env::args_os()));
}
