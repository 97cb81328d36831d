fn main() {
    let code = pdkit::cli::run(std::env::args_os());
    std::process::exit(code);
}
