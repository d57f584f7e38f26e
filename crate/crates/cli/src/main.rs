mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::CliError;

#[derive(Parser)]
#[command(name = "fudge", version, about = "Functional differential graph estimation")]
struct Cli {
    /// Worker threads for replicates, time points and nodes (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a precision pair and two noisy curve panels.
    Simulate(SimulateArgs),
    /// Estimate the differential graph from two panel CSVs.
    Estimate(EstimateArgs),
    /// Run a replicate experiment and write ROC/AUC summaries.
    Evaluate(EvaluateArgs),
    /// Evaluate the finite-sample recovery constants.
    Theory(TheoryArgs),
}

#[derive(Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// power-law, tri-block, erdos-renyi or fourier-diag
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub noise_sd: Option<f64>,
    #[arg(long)]
    pub grid_len: Option<usize>,
}

#[derive(Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Panel CSV of the first population.
    #[arg(long)]
    pub x: Option<PathBuf>,
    /// Panel CSV of the second population.
    #[arg(long)]
    pub y: Option<PathBuf>,
    /// Fixed number of principal components per node.
    #[arg(long)]
    pub m: Option<usize>,
    /// Fixed cubic B-spline dimension.
    #[arg(long)]
    pub l: Option<usize>,
    /// Comma-separated descending penalties.
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// separate or pooled
    #[arg(long)]
    pub basis_mode: Option<String>,
}

#[derive(Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated subset of fudge,multiple.
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
}

#[derive(Args)]
pub struct TheoryArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Also write the report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(j) = cli.jobs {
            if j == 0 {
                return Err(CliError::Validation("--jobs must be at least 1".into()));
            }
            b = b.num_threads(j);
        }
        b.build().map_err(|e| CliError::Validation(e.to_string()))?
    };
    pool.install(|| match cli.command {
        Command::Simulate(a) => commands::simulate(&a),
        Command::Estimate(a) => commands::estimate(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::Theory(a) => commands::theory(&a),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
