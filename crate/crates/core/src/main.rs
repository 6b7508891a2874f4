fn main() {
    std::process::exit(fraunhofer_cgh::cli::run(std::env::args_os()));
}
