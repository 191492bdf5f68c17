fn main() {
    std::process::exit(risbeam::harness::cli::run(std::env::args_os()));
}
