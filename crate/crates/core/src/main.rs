fn main() {
    std::process::exit(drstab::cli::run(std::env::args_os()));
}
