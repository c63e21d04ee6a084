fn main() {
    std::process::exit(relboltz::cli::run(std::env::args_os()));
}
