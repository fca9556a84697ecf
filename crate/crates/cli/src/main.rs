fn main() {
    std::process::exit(maskforge_cli::run(std::env::args_os()));
}
