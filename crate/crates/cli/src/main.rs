fn main() {
    let _ = env_logger::try_init();
    std::process::exit(raycert_cli::run(std::env::args_os()));
}
