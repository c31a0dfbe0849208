//! `photonsub` command-line driver.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure,
//! 4 finished with a convergence warning.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{CliError, Context};

#[derive(Parser)]
#[command(name = "photonsub", version, about = "Photon-subtracted squeezed vacuum from a cw OPO")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML run configuration; defaults apply to omitted keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master RNG seed (overrides `seed` in the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Number of independent datasets or reconstructions.
    #[arg(long, default_value_t = 1)]
    repeat: usize,
    /// Fock cutoff for simulation, synthesis and tomography.
    #[arg(long)]
    n_max: Option<usize>,
    /// Detector efficiency, used both for synthesis and the tomography POVM.
    #[arg(long)]
    eta_det: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Conditioned state from the Gaussian model: Fock matrix, Wigner grid, metrics.
    Simulate(Common),
    /// Synthetic homodyne records, vacuum calibration, segments and spectra.
    SynthData(Common),
    /// Maximum-likelihood reconstruction of one or more datasets.
    Reconstruct {
        /// Dataset CSV, or the synth-data output directory with --repeat.
        input: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Fit gain and total efficiency to a squeezing spectrum or noise trace.
    FitSpectrum {
        input: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Optimize the Ansatz mode widths for the configured objective.
    OptimizeMode(Common),
    /// Wigner grid of a density matrix stored as JSON.
    Wigner {
        input: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

fn context(command: &'static str, c: &Common) -> Result<Context, CliError> {
    let mut config = match &c.config {
        Some(p) => config::load(p).map_err(CliError::Config)?,
        None => config::RunConfig::default(),
    };
    if let Some(s) = c.seed {
        config.seed = s;
    }
    if let Some(n) = c.n_max {
        config.simulate.n_max = n;
        config.data.n_max = n;
        config.tomography.n_max = n;
    }
    if let Some(e) = c.eta_det {
        config.data.eta_det = e;
        config.tomography.eta = e;
    }
    if c.repeat == 0 {
        return Err(CliError::Config("--repeat must be at least 1".into()));
    }
    config.opo.resolve();
    config.validate().map_err(CliError::Config)?;
    Ok(Context {
        command,
        config,
        config_path: c.config.clone(),
        out: c.out.clone(),
        repeat: c.repeat,
    })
}

fn run(cli: Cli) -> Result<Vec<String>, CliError> {
    match &cli.command {
        Command::Simulate(c) => commands::simulate(&context("simulate", c)?),
        Command::SynthData(c) => commands::synth_data(&context("synth-data", c)?),
        Command::Reconstruct { input, common } => commands::reconstruct_cmd(&context("reconstruct", common)?, input),
        Command::FitSpectrum { input, common } => {
            commands::fit_spectrum_cmd(&context("fit-spectrum", common)?, input)
        }
        Command::OptimizeMode(c) => commands::optimize_mode_cmd(&context("optimize-mode", c)?),
        Command::Wigner { input, common } => commands::wigner_cmd(&context("wigner", common)?, input),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(warnings) if warnings.is_empty() => ExitCode::SUCCESS,
        Ok(warnings) => {
            for w in warnings {
                eprintln!("warning: {w}");
            }
            ExitCode::from(4)
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
