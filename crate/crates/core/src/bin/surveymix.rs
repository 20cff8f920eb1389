fn main() {
    std::process::exit(surveymix::cli::run(std::env::args_os()));
}
