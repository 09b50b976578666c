//! `mci`: simulate, deconvolve, and export kernels and regularization paths.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use mci_deconv::evaluation::Method;

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "MCI_OUTPUT_DIR";

#[derive(Parser)]
#[command(name = "mci", version, about = "Sparse deconvolution of BOLD-like series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the simulation grid and score every method against the truth.
    Simulate(SimulateArgs),
    /// Estimate activations in a measured series.
    Deconvolve(DeconvolveArgs),
    /// Write the sampled canonical HRF as CSV.
    Hrf(HrfArgs),
    /// Write the regularization path of a series as JSON.
    Path(PathArgs),
}

// Every command's arguments double as its JSON config file: keys are the long
// flag names with `_` for `-`. Flags override the file.

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateArgs {
    /// JSON config file with any of the flags below.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Series length.
    #[arg(long)]
    pub n: Option<usize>,
    /// Spike counts, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub spikes: Option<Vec<usize>>,
    /// SNR values, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub snr: Option<Vec<f64>>,
    /// Replicates per (spikes, snr) cell.
    #[arg(long)]
    pub reps: Option<usize>,
    /// Method identifiers, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<Method>>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Sampling period in seconds.
    #[arg(long)]
    pub tr: Option<f64>,
    /// Delay of the HRF onset in samples.
    #[arg(long)]
    pub hrf_shift: Option<usize>,
    /// Worker threads; 0 uses all cores. Results do not depend on it.
    #[arg(long)]
    pub parallelism: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeconvolveArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Series CSV with a `time,value` or `value` header.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Sampling period; required when the input has no time column.
    #[arg(long)]
    pub tr: Option<f64>,
    #[arg(long, conflicts_with = "hrf_file")]
    pub hrf_shift: Option<usize>,
    /// Kernel CSV with a `value` column, used instead of the canonical HRF.
    #[arg(long)]
    pub hrf_file: Option<PathBuf>,
    #[arg(long)]
    pub method: Option<Method>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HrfArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub tr: Option<f64>,
    #[arg(long)]
    pub hrf_shift: Option<usize>,
    /// Kernel support in seconds.
    #[arg(long)]
    pub duration: Option<f64>,
    /// Output CSV; standard output if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    Lasso,
    Dantzig,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub tr: Option<f64>,
    #[arg(long, conflicts_with = "hrf_file")]
    pub hrf_shift: Option<usize>,
    #[arg(long)]
    pub hrf_file: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub solver: Option<Solver>,
    /// Output JSON; standard output if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Why a command stopped.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags or configuration; exit 2 with usage.
    Usage(String),
    /// Unreadable or malformed input data; exit 2.
    Input(String),
    /// The computation or output failed; exit 1.
    Run(String),
    /// Outputs were written but some records failed; exit 1.
    Partial(String),
}

fn usage(subcommand: &str) -> Option<String> {
    let mut cmd = Cli::command();
    cmd.build();
    cmd.find_subcommand_mut(subcommand).map(|c| c.render_usage().to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // clap omits the usage line for rejected values
            if matches!(e.kind(), ErrorKind::InvalidValue | ErrorKind::ValueValidation) {
                if let Some(u) = std::env::args().nth(1).as_deref().and_then(usage) {
                    eprintln!("\n{u}");
                }
            }
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let (name, outcome) = match cli.command {
        Command::Simulate(a) => ("simulate", commands::simulate(a)),
        Command::Deconvolve(a) => ("deconvolve", commands::deconvolve(a)),
        Command::Hrf(a) => ("hrf", commands::hrf(a)),
        Command::Path(a) => ("path", commands::path(a)),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            let usage = usage(name).unwrap_or_default();
            eprintln!("error: {msg}\n\n{usage}\n\nFor more information, try 'mci {name} --help'.");
            ExitCode::from(2)
        }
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Partial(msg)) => {
            eprintln!("warning: {msg}");
            ExitCode::from(1)
        }
    }
}
