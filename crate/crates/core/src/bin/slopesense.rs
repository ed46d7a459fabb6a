fn main() {
    std::process::exit(slopesense::cli::run(std::env::args_os()));
}
