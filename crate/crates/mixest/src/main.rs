fn main() {
    std::process::exit(mixest::cli::run(std::env::args_os()))
}
