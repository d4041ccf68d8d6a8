fn main() {
    std::process::exit(levylab::cli::run(std::env::args_os()));
}
