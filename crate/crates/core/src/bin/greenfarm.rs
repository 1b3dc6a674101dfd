fn main() {
    std::process::exit(greenfarm::cli::run(std::env::args_os()));
}
