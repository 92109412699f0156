fn main() {
    std::process::exit(qkd2way::cli::run(std::env::args_os()));
}
