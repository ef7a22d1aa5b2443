fn main() {
    std::process::exit(fraclap_cli::run_main(std::env::args_os()));
}
