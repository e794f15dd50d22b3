fn main() {
    std::process::exit(evpool::cli::run(std::env::args_os()));
}
