fn main() {
    std::process::exit(offload_core::cli::cli_main(std::env::args_os()));
}
