fn main() {
    std::process::exit(tsr_cli::run(std::env::args_os()));
}
