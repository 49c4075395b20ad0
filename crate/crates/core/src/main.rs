fn main() {
    std::process::exit(silfit::cli::run(std::env::args_os()));
}
