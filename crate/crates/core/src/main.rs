fn main() {
    let code = rwre::cli::main(std::env::args_os());
    std::process::exit(code);
}
