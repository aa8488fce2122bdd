fn main() {
    std::process::exit(obslearn::cli::run(std::env::args_os()));
}
