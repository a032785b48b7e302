fn main() {
    std::process::exit(toepcomp::cli::run(std::env::args_os()));
}
