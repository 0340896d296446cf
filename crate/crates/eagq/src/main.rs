fn main() {
    std::process::exit(eagq::cli::run(std::env::args_os()));
}
