fn main() {
    std::process::exit(eispinr::io::cli::cli_main(std::env::args_os()));
}
