fn main() {
    std::process::exit(pathfuse_cli::run(std::env::args_os()));
}
