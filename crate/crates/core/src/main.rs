fn main() {
    std::process::exit(vbin::cli::run(std::env::args_os()));
}
