fn main() {
    std::process::exit(curvatur::cli::run(std::env::args_os()));
}
