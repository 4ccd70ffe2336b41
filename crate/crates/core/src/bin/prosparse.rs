fn main() {
    std::process::exit(prosparse::cli_io::run(std::env::args_os()));
}
