mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "specsbm", version, about = "Fit and sample random-parameter block models from graph corpora")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Seed for every randomized step.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// JSON settings file for the subcommand.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Family {
    Dirac,
    Uniform,
    Beta,
    Gauss,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kernel {
    Uniform,
    Gauss,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample graphs from a model spec into edge-list files.
    Sample {
        /// JSON model spec: an RPSBM or plain SBM parameter set.
        model: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Top-c spectrum and density of every corpus graph, as CSV.
    Spectra {
        corpus: PathBuf,
        #[arg(short, long)]
        c: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Mean spectrum, covariance and Fréchet variance of a corpus.
    Moments {
        corpus: PathBuf,
        #[arg(short, long)]
        c: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Parametric moment-matching fit.
    Fit {
        corpus: PathBuf,
        #[arg(short, long)]
        c: usize,
        #[arg(long, value_enum, default_value = "uniform")]
        family: Family,
        /// Geometry vector, comma separated; 1/c everywhere by default.
        #[arg(long, value_delimiter = ',', conflicts_with = "s_from_geometry")]
        s: Option<Vec<f64>>,
        /// Average the detected geometry of graphs with c communities.
        #[arg(long)]
        s_from_geometry: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Nonparametric kernel-mixture fit in graph space.
    FitNp {
        corpus: PathBuf,
        #[arg(short, long)]
        c: usize,
        /// `silverman` or `fixed:<h>`.
        #[arg(long, default_value = "silverman")]
        bandwidth: String,
        #[arg(long, value_enum, default_value = "uniform")]
        kernel: Kernel,
        /// Use each graph's detected geometry.
        #[arg(long)]
        s_from_geometry: bool,
        /// Center kernels at (λ - 1)/(n ω s).
        #[arg(long)]
        unit_shift: bool,
        /// Also draw this many graphs from the fitted mixture.
        #[arg(long)]
        resample: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Variance-regime diagnostics.
    Regimes {
        corpus: PathBuf,
        #[arg(short, long)]
        c: usize,
        #[arg(long, value_delimiter = ',')]
        s: Option<Vec<f64>>,
        #[command(flatten)]
        common: Common,
    },
    /// Per-graph community count and geometry, clustered by count.
    Geometry {
        corpus: PathBuf,
        /// Change-point penalty factor; the penalty is beta·ln n.
        #[arg(long)]
        beta: Option<f64>,
        /// Include the canonical node order of every graph.
        #[arg(long)]
        with_order: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Critical corpus size of an ER mixture, plus density curves.
    CriticalN {
        /// JSON ER mixture spec {"n", "omega", "p"}.
        spec: PathBuf,
        #[arg(long, default_value_t = 1000)]
        n_max: usize,
        #[arg(long, default_value_t = 5)]
        repetitions: usize,
        /// Corpus size of the curve run.
        #[arg(long, default_value_t = 125)]
        curve_count: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Sliding-window graphs from a "t i j" contact file.
    Contacts {
        input: PathBuf,
        #[arg(long, default_value_t = 2700.0)]
        window: f64,
        #[arg(long, default_value_t = 20.0)]
        step: f64,
        #[arg(long, default_value_t = 0.0)]
        origin: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Run a named experiment scenario.
    Replicate {
        /// recoverability, mixture-beta, critical-n or contacts.
        scenario: String,
        #[command(flatten)]
        common: Common,
    },
    /// Re-run the command recorded in a manifest and compare outputs.
    Replay {
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli, argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
