use anyhow::Context;
use clap::Parser;
use otcause::cli::{run, Cli, Command};

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let name = match &cli.command {
        Command::Infer { .. } => "infer",
        Command::Bench { .. } => "bench",
        Command::Orient { .. } => "orient",
    };
    run(&cli).with_context(|| format!("{name} failed"))
}
