fn main() {
    std::process::exit(ruelle::cli::main_with_args(std::env::args_os()));
}
