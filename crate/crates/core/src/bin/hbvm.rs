fn main() {
    std::process::exit(hbvm::cli::cli_main(std::env::args_os()));
}
