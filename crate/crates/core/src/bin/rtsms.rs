fn main() {
    env_logger::init();
    std::process::exit(rtsms::cli::run(std::env::args_os()));
}
