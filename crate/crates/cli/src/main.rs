//! `nbplc`: evaluate, sample, synthesize, fit and validate narrowband
//! power-line noise models.
//!
//! Exit codes: 0 success, 2 argument or input error, 3 output I/O error,
//! 4 numerical fit failure.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nbplc_core::Band;

#[derive(Parser)]
#[command(
    name = "nbplc",
    version,
    about = "Narrowband power-line noise modelling toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the built-in background presets as JSON
    Presets {
        /// Write to this file instead of standard output
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a model PSD on a uniform grid and write it as a trace CSV
    EvalPsd {
        #[command(flatten)]
        source: ModelSource,
        /// Frequency band LO:HI in Hz (defaults to the model's band)
        #[arg(long)]
        band: Option<Band>,
        #[arg(long, default_value_t = 1024)]
        points: usize,
        /// Write to this file instead of standard output
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw random models from parameter priors
    Sample {
        /// Priors JSON (defaults to the built-in priors)
        #[arg(long)]
        priors: Option<PathBuf>,
        #[command(flatten)]
        seed: SeedArg,
        #[arg(long)]
        count: usize,
        /// Output directory for model_NNNN.json files
        #[arg(long)]
        out: PathBuf,
    },
    /// Synthesize a noise waveform from a model
    Generate {
        #[command(flatten)]
        source: ModelSource,
        /// Duration in seconds
        #[arg(long, default_value_t = 1.0)]
        duration: f64,
        /// Sample rate in Hz
        #[arg(long, default_value_t = 1_048_576.0)]
        rate: f64,
        #[command(flatten)]
        seed: SeedArg,
        #[arg(long, value_enum, default_value_t = WaveFormat::Bin)]
        format: WaveFormat,
        #[command(flatten)]
        units: Units,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit background and interferers to a PSD trace or a waveform
    Fit {
        #[command(flatten)]
        input: FitInput,
        /// Fit band LO:HI in Hz
        #[arg(long, default_value_t = Band::default())]
        band: Band,
        /// Welch resolution bandwidth in Hz for waveform input
        #[arg(long, default_value_t = 3000.0)]
        resolution: f64,
        #[command(flatten)]
        units: Units,
        /// Report JSON; the residual trace goes to STEM.residual.csv
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a campaign of PSD traces and estimate parameter priors
    Characterize {
        /// Trace CSV files
        #[arg(required = true)]
        traces: Vec<PathBuf>,
        #[arg(long, default_value_t = Band::default())]
        band: Band,
        /// Priors JSON
        #[arg(long)]
        out: PathBuf,
        /// Full campaign report JSON (per-trace fits and distribution fits)
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Synthesize from a model and test the amplitude distribution
    Validate {
        #[command(flatten)]
        source: ModelSource,
        #[command(flatten)]
        seed: SeedArg,
        #[arg(long, default_value_t = 1.0)]
        duration: f64,
        #[arg(long, default_value_t = 1_048_576.0)]
        rate: f64,
        /// Histogram bins of the amplitude PDF
        #[arg(long, default_value_t = 100)]
        bins: usize,
        /// Rows of the decimated CDF file
        #[arg(long, default_value_t = 1000)]
        cdf_points: usize,
        #[command(flatten)]
        units: Units,
        /// Report JSON; PDF and CDF data go to STEM.pdf.csv and STEM.cdf.csv
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct ModelSource {
    /// Model JSON file
    #[arg(long)]
    model: Option<PathBuf>,
    /// Background preset name (worst or best)
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct FitInput {
    /// PSD trace CSV
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Waveform file (CSV or NBW1 binary)
    #[arg(long)]
    waveform: Option<PathBuf>,
}

#[derive(Args)]
struct SeedArg {
    #[arg(long, env = "NBPLC_SEED", default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct Units {
    /// Reference impedance in ohms for dBm conversions
    #[arg(long, default_value_t = 50.0)]
    impedance: f64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum WaveFormat {
    Csv,
    Bin,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("nbplc: {f}");
            ExitCode::from(f.code)
        }
    }
}
