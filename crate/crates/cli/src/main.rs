mod commands;
mod render;
mod simulate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub const DEFAULT_SEED: u64 = 0x5eed_2024;

#[derive(Debug, Parser)]
#[command(name = "mpdse", version, about = "Design-space exploration for mixed-precision CNN accelerators")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Calibration file (JSON). Defaults to the embedded calibration.
    #[arg(long, global = true, env = "MPDSE_CALIB")]
    pub calib: Option<PathBuf>,
    /// Hardware constraints file (JSON). Missing fields take defaults.
    #[arg(long, global = true)]
    pub constraints: Option<PathBuf>,
    /// Output directory for CSV/JSON artifacts.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Format of standard output.
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    /// Worker threads for parallel sweeps.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Seed for randomized runs.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rank PE styles by processed bits/s/LUT.
    PeDse(commands::PeDseArgs),
    /// Full flow: PE ranking, array search and evaluation.
    Explore(commands::ExploreArgs),
    /// Check the bit-level PE simulator against integer arithmetic.
    Simulate(simulate::SimulateArgs),
    /// Weight memory footprint and compression factor.
    Footprint(commands::FootprintArgs),
    /// Re-evaluate a saved design.json.
    Report(commands::ReportArgs),
}

/// Mismatch between simulator and oracle.
#[derive(Debug)]
pub struct Mismatch(pub String);

impl std::fmt::Display for Mismatch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "mismatch: {}", self.0)
    }
}

impl std::error::Error for Mismatch {}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::PeDse(a) => commands::pe_dse(&cli.global, a),
        Command::Explore(a) => commands::explore(&cli.global, a),
        Command::Simulate(a) => simulate::run(&cli.global, a),
        Command::Footprint(a) => commands::footprint(&cli.global, a),
        Command::Report(a) => commands::report(&cli.global, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Mismatch>().is_some() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
