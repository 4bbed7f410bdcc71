fn main() {
    std::process::exit(dyadnet_cli::run(std::env::args_os()));
}
