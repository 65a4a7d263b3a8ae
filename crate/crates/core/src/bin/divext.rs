fn main() {
    std::process::exit(divext::cli::run(std::env::args_os()));
}
