use std::process::ExitCode;

use clap::Parser;

mod args;
mod commands;
mod svg;

use args::{Cli, Command, FileConfig, Resolved};

/// Bad flags or config values; exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn run(cli: Cli) -> anyhow::Result<()> {
    let file = match &cli.global.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let resolved = Resolved::new(&cli.global, &file);
    let written = match cli.command {
        Command::Encode(a) => commands::encode(a.merge(file.encode), &resolved)?,
        Command::TrainAae(a) => commands::train_aae(a.merge(file.train_aae), &resolved)?,
        Command::Match(a) => commands::match_cmd(a.merge(file.match_), &resolved)?,
        Command::GroverScan(a) => commands::grover_scan(a.merge(file.grover_scan), &resolved)?,
        Command::NoiseStudy(a) => commands::noise_study(a.merge(file.noise_study), &resolved)?,
    };
    for path in written {
        println!("{}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
