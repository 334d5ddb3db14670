fn main() {
    std::process::exit(matdisc::harness::cli::run_cli(std::env::args_os()));
}
