//! Experiment runners behind the `tt` command.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use config::{Cli, Command, ExperimentConfig};
pub use error::CliError;

/// Runs one parsed command line.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = ExperimentConfig::from_command(&cli.command)?;
    log::info!("{} with config hash {}", cfg.command, cfg.hash());
    match &cli.command {
        Command::Typical(_) => commands::cmd_typical(&cfg),
        Command::Compare(_) => commands::cmd_compare(&cfg),
        Command::Count(_) => commands::cmd_count(&cfg),
        Command::Sample(_) => commands::cmd_sample(&cfg),
        Command::Concentrate(_) => commands::cmd_concentrate(&cfg),
        Command::Scale(_) => commands::cmd_scale(&cfg),
    }
}
