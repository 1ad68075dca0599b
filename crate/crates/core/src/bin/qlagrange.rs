fn main() {
    std::process::exit(qlagrange::cli::run(std::env::args_os()));
}
