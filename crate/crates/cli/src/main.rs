fn main() {
    std::process::exit(milspend_cli::run(std::env::args_os()));
}
