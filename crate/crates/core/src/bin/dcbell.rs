fn main() {
    std::process::exit(dcbell::cli::run_from_args(std::env::args_os()));
}
