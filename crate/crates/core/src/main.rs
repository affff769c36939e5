fn main() {
    std::process::exit(bellsim::interface::cli_main(std::env::args_os()));
}
