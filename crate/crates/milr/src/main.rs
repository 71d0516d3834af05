fn main() {
    std::process::exit(milr::cli::cli_main(std::env::args()));
}
