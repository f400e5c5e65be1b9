fn main() {
    std::process::exit(bottcher_core::cli::cli_main(std::env::args_os()));
}
