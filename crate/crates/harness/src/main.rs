fn main() {
    std::process::exit(usersim::cli::main_with_args(std::env::args_os()));
}
