fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("QST_LOG", "warn")).init();
    std::process::exit(qstomo::cli::run(std::env::args_os()));
}
