use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sipipe::config::{parse_candidates, parse_pipeline, serialize_pipeline};
use sipipe::data::{load_dataset, LoadOptions, DEFAULT_MISSING_TOKEN};
use sipipe::infer::{infer, Method, Sigma};
use sipipe::simulate::{simulate, Mode, SimConfig};
use sipipe::{AppError, AppResult};

#[derive(Parser)]
#[command(name = "sipipe", version, about = "Selective p-values for feature-selection pipelines")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Test the features a pipeline selects on a CSV dataset.
    Infer(InferArgs),
    /// Rejection rates on synthetic null or signal data.
    Simulate(SimulateArgs),
    /// Print a built-in reference pipeline as JSON.
    Example {
        #[arg(value_enum)]
        name: Example,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Example {
    Op1,
    Op2,
}

#[derive(Args)]
#[group(id = "method", required = true, multiple = false, args = ["pipeline", "cv"])]
struct MethodArgs {
    /// Pipeline config.
    #[arg(long)]
    pipeline: Option<PathBuf>,
    /// Candidate-set config; the pipeline is chosen by cross-validation.
    #[arg(long)]
    cv: Option<PathBuf>,
}

#[derive(Args)]
#[group(id = "noise", required = true, multiple = false, args = ["sigma", "estimate_sigma"])]
struct SigmaArgs {
    /// Known noise standard deviation.
    #[arg(long)]
    sigma: Option<f64>,
    /// Estimate the noise level from an OLS fit on the observed rows.
    #[arg(long)]
    estimate_sigma: bool,
}

#[derive(Args)]
struct InferArgs {
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    method: MethodArgs,
    #[command(flatten)]
    sigma: SigmaArgs,
    /// Response column; defaults to the last one.
    #[arg(long)]
    target: Option<String>,
    #[arg(long, default_value = DEFAULT_MISSING_TOKEN)]
    missing_token: String,
    /// Report path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Null,
    Power,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    mode: ModeArg,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    d: usize,
    #[arg(long)]
    trials: usize,
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[command(flatten)]
    method: MethodArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Use the estimated noise level instead of the true one.
    #[arg(long)]
    estimate_sigma: bool,
    /// Include per-trial wall-clock quantiles in the report.
    #[arg(long)]
    timing: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn read(path: &Path) -> AppResult<String> {
    std::fs::read_to_string(path).map_err(|source| AppError::Io { path: path.display().to_string(), source })
}

fn method(args: &MethodArgs) -> AppResult<Method> {
    match (&args.pipeline, &args.cv) {
        (Some(p), _) => Ok(Method::Pipeline(parse_pipeline(&read(p)?)?)),
        (None, Some(c)) => Ok(Method::Cv(parse_candidates(&read(c)?)?)),
        (None, None) => Err(AppError::Usage("one of --pipeline or --cv is required".to_string())),
    }
}

fn emit(json: String, out: Option<&Path>) -> AppResult<()> {
    match out {
        Some(path) => std::fs::write(path, json + "\n")
            .map_err(|source| AppError::Io { path: path.display().to_string(), source }),
        None => {
            println!("{json}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> AppResult<()> {
    match cli.command {
        Command::Infer(args) => {
            let options = LoadOptions { missing_token: args.missing_token.clone(), target: args.target.clone() };
            let data = load_dataset(&args.data, &options)?;
            let sigma = match args.sigma.sigma {
                Some(s) => Sigma::Known(s),
                None => Sigma::Estimate,
            };
            let report = infer(&data, &method(&args.method)?, sigma)?;
            emit(serde_json::to_string_pretty(&report)?, args.out.as_deref())
        }
        Command::Simulate(args) => {
            let config = SimConfig {
                mode: match args.mode {
                    ModeArg::Null => Mode::Null,
                    ModeArg::Power => Mode::Power,
                },
                n: args.n,
                d: args.d,
                trials: args.trials,
                delta: args.delta,
                alpha: args.alpha,
                seed: args.seed,
                jobs: args.jobs,
                sigma: if args.estimate_sigma { Sigma::Estimate } else { Sigma::Known(1.0) },
                method: method(&args.method)?,
            };
            let report = simulate(&config, args.timing)?;
            emit(serde_json::to_string_pretty(&report)?, args.out.as_deref())
        }
        Command::Example { name } => {
            let graph = match name {
                Example::Op1 => sipipe_core::graph::example_op1(),
                Example::Op2 => sipipe_core::graph::example_op2(),
            };
            emit(serialize_pipeline(&graph), None)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
