fn main() {
    std::process::exit(spsn::cli::main_with_args(std::env::args_os()));
}
