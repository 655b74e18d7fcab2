fn main() {
    std::process::exit(jobrec::cli::run(std::env::args_os()));
}
