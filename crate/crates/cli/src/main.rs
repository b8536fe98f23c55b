fn main() {
    std::process::exit(ewens_pitman_cli::cli_dispatch(std::env::args_os()));
}
