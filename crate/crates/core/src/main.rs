fn main() {
    std::process::exit(ktree::cli::run(std::env::args_os()));
}
