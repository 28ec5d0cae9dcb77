fn main() {
    std::process::exit(msh::cli::run(std::env::args_os()));
}
