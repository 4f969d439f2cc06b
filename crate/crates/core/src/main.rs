fn main() {
    std::process::exit(haptex::cli::run(std::env::args_os()));
}
