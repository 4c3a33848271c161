fn main() {
    std::process::exit(bradford::cli::run(std::env::args_os()));
}
