mod commands;
mod config;
mod data;
mod failure;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand};

use failure::Failure;

#[derive(Parser, Debug)]
#[command(name = "misspec", version, about = "Tolerance radii, compromise estimators and risk functions for narrow vs wide models")]
struct Cli {
    /// Worker threads for parallel sections; 0 uses all cores. Results do
    /// not depend on this.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// List the built-in models and their estimands.
    Models,
    /// Tolerance radius, danger index, border distances and selection rows.
    Tolerance(ToleranceArgs),
    /// Risk curves R(a) of compromise estimators, as CSV.
    Risk(RiskArgs),
    /// The L1 tolerance a0(rho).
    L1(L1Args),
    /// AIC/Schwarz narrow-model probabilities and detection power.
    Select(SelectArgs),
    /// Narrow, wide and compromise estimates from a data file.
    Estimate(EstimateArgs),
    /// Run a Monte Carlo study described by a TOML file.
    Simulate(SimulateArgs),
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    /// Catalogue model name (see `misspec models`).
    #[arg(long)]
    pub model: String,
    /// Null parameter values, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub theta0: Option<Vec<f64>>,
    /// Covariate range b of the design x_i = b i/(n+1).
    #[arg(long)]
    pub spread: Option<f64>,
    /// Share of observations in the first group (two-sample).
    #[arg(long)]
    pub group_fraction: Option<f64>,
}

#[derive(Args, Debug)]
pub struct ToleranceArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Sample size; with --m, the size of the second group.
    #[arg(long)]
    pub n: usize,
    /// Size of the first group (two-sample); the total is m + n.
    #[arg(long)]
    pub m: Option<usize>,
    /// Report the bias geometry for this estimand.
    #[arg(long)]
    pub estimand: Option<String>,
    /// Evaluate the narrow-better verdict at this departure delta (q values).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub delta: Option<Vec<f64>>,
    /// Also write `quantity,value` rows to this file.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct RiskArgs {
    /// Estimator spec `name[:key=val,...]`; repeat for more columns.
    /// Defaults to wide, narrow, eb, qhat, pretest, efron_morris, atan.
    #[arg(long = "estimator")]
    pub estimators: Vec<String>,
    /// Grid `lo:hi:step` for a.
    #[arg(long, default_value = "0:5:0.05")]
    pub grid: String,
    /// `l2` or `l1:rho`.
    #[arg(long, default_value = "l2")]
    pub loss: String,
    /// Output file; standard output if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct L1Args {
    /// Values of rho = |b| kappa / tau0; repeat or comma separate.
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 1.0, 5.0, 50.0])]
    pub rho: Vec<f64>,
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("point").required(true).args(["a", "ncp"])))]
pub struct SelectArgs {
    /// Standardized departure a = delta/kappa; noncentrality a^2.
    #[arg(long, allow_negative_numbers = true)]
    pub a: Option<f64>,
    /// Noncentrality delta' (J^22)^{-1} delta directly.
    #[arg(long)]
    pub ncp: Option<f64>,
    /// Number of departure parameters; repeat or comma separate.
    #[arg(long, value_delimiter = ',', default_values_t = [1u32])]
    pub q: Vec<u32>,
    /// Sample size, for the Schwarz column.
    #[arg(long)]
    pub n: Option<f64>,
    /// Test levels for the power columns.
    #[arg(long, value_delimiter = ',', default_values_t = misspec_core::tolerance::POWER_LEVELS)]
    pub level: Vec<f64>,
}

#[derive(Args, Debug)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Data file: one observation per line.
    #[arg(long)]
    pub data: PathBuf,
    /// Estimand to report (see `misspec models`).
    #[arg(long)]
    pub estimand: String,
    /// Estimator spec; repeat for more. Defaults to narrow, wide, eb.
    #[arg(long = "estimator")]
    pub estimators: Vec<String>,
    /// Also write `estimator,weight,estimate` rows to this file.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Study description (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Master seed; every replication draws from its own stream of it.
    #[arg(long)]
    pub seed: u64,
    /// Output directory; overrides `[output] dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), Failure> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| Failure::usage(format!("cannot set up {} threads: {e}", cli.threads)))?;
    }
    match cli.command {
        Command::Models => commands::models(),
        Command::Tolerance(a) => commands::tolerance(&a),
        Command::Risk(a) => commands::risk(&a),
        Command::L1(a) => commands::l1(&a),
        Command::Select(a) => commands::select(&a),
        Command::Estimate(a) => commands::estimate(&a),
        Command::Simulate(a) => commands::simulate(&a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}
