use clap::Parser;

use dnm::cli::{self, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = cli::run(Cli::parse()) {
        eprintln!("dnm: {e}");
        std::process::exit(e.exit_code());
    }
}
