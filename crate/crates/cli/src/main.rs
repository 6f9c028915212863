use std::path::PathBuf;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let env_cache = std::env::var_os(torsionlab_cli::CACHE_ENV).map(PathBuf::from);
    std::process::exit(torsionlab_cli::main_with_args(std::env::args_os(), env_cache));
}
