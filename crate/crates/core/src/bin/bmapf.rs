fn main() {
    std::process::exit(bmapf::cli::main_with_args(std::env::args_os()));
}
