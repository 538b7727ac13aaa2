fn main() {
    std::process::exit(latwalk::cli::main_from_args(std::env::args_os()));
}
