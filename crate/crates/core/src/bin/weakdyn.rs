//! `weakdyn`: data generation, estimator sweeps and training comparisons.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use weakdyn::experiments::spec::{CrossingParams, EvaluateParams, StrongSweep, WeakSweep};
use weakdyn::experiments::{error_record, exit_code, parse_values, run, CompareConfig, ConfigFile, Experiment, ExperimentSpec};
use weakdyn::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "weakdyn", version, about = "Strong- and weak-form identification of dynamical systems")]
struct Cli {
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// TOML file with a table per subcommand.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Noisy damped-oscillator trajectories as CSV.
    GenData(GenDataArgs),
    /// Strong-estimator error versus step size.
    EstimateStrong(StrongArgs),
    /// Weak-estimator error versus support length.
    EstimateWeak(WeakArgs),
    /// Step sizes at which the strong estimator is exact.
    Crossing(CrossingArgs),
    /// Strong versus weak training on the same noisy data.
    TrainCompare(CompareArgs),
    /// Scores a saved model on trajectory CSVs.
    Evaluate(EvaluateArgs),
}

#[derive(Args, Debug)]
struct GenDataArgs {
    #[arg(long)]
    zeta: Option<f64>,
    #[arg(long)]
    trajectories: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    noise: Option<f64>,
}

#[derive(Args, Debug)]
struct StrongArgs {
    #[arg(long, allow_hyphen_values = true)]
    lambda: Option<f64>,
    /// Comma list or range `lo..hi[:n]`.
    #[arg(long)]
    sigmas: Option<String>,
    #[arg(long)]
    dts: Option<String>,
    #[arg(long)]
    runs: Option<usize>,
}

#[derive(Args, Debug)]
struct WeakArgs {
    #[arg(long, allow_hyphen_values = true)]
    lambda: Option<f64>,
    #[arg(long)]
    sigmas: Option<String>,
    /// Support lengths, comma list or range.
    #[arg(long = "S", alias = "supports")]
    supports: Option<String>,
    #[arg(long)]
    runs: Option<usize>,
}

#[derive(Args, Debug)]
struct CrossingArgs {
    #[arg(long, allow_hyphen_values = true)]
    lambda: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    runs: Option<usize>,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[arg(long)]
    noise: Option<f64>,
    /// Iterations of both runs.
    #[arg(long)]
    iters: Option<usize>,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Directory of `traj_XXXX.csv` files.
    #[arg(long)]
    data: Option<PathBuf>,
}

fn list(v: &Option<String>) -> Result<Option<Vec<f64>>> {
    v.as_deref().map(parse_values).transpose()
}

fn build_spec(cli: Cli) -> Result<ExperimentSpec> {
    let file = match &cli.config {
        Some(path) => ConfigFile::parse(
            &std::fs::read_to_string(path).map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?,
        )?,
        None => ConfigFile::default(),
    };
    let experiment = match cli.command {
        Command::GenData(a) => {
            let mut p = file.gen_data.unwrap_or_default();
            p.zeta = a.zeta.unwrap_or(p.zeta);
            p.trajectories = a.trajectories.unwrap_or(p.trajectories);
            p.steps = a.steps.unwrap_or(p.steps);
            p.dt = a.dt.unwrap_or(p.dt);
            p.noise = a.noise.unwrap_or(p.noise);
            Experiment::GenData(p)
        }
        Command::EstimateStrong(a) => {
            let mut p: StrongSweep = file.estimate_strong.unwrap_or_default();
            p.lambda = a.lambda.unwrap_or(p.lambda);
            p.sigmas = list(&a.sigmas)?.unwrap_or(p.sigmas);
            p.dts = list(&a.dts)?.unwrap_or(p.dts);
            p.runs = a.runs.unwrap_or(p.runs);
            Experiment::EstimateStrong(p)
        }
        Command::EstimateWeak(a) => {
            let mut p: WeakSweep = file.estimate_weak.unwrap_or_default();
            p.lambda = a.lambda.unwrap_or(p.lambda);
            p.sigmas = list(&a.sigmas)?.unwrap_or(p.sigmas);
            p.supports = list(&a.supports)?.unwrap_or(p.supports);
            p.runs = a.runs.unwrap_or(p.runs);
            Experiment::EstimateWeak(p)
        }
        Command::Crossing(a) => {
            let mut p: CrossingParams = file.crossing.unwrap_or_default();
            p.lambda = a.lambda.unwrap_or(p.lambda);
            p.sigma = a.sigma.unwrap_or(p.sigma);
            p.runs = a.runs.unwrap_or(p.runs);
            Experiment::Crossing(p)
        }
        Command::TrainCompare(a) => {
            let mut c: CompareConfig = file.train_compare.unwrap_or_default();
            c.noise = a.noise.unwrap_or(c.noise);
            if let Some(n) = a.iters {
                c = c.with_iters(n);
            }
            Experiment::TrainCompare(c)
        }
        Command::Evaluate(a) => {
            let mut p: EvaluateParams = file.evaluate.unwrap_or_default();
            p.checkpoint = a.checkpoint.unwrap_or(p.checkpoint);
            p.data = a.data.unwrap_or(p.data);
            if p.checkpoint.as_os_str().is_empty() || p.data.as_os_str().is_empty() {
                return Err(Error::InvalidArgument("evaluate needs --checkpoint and --data".into()));
            }
            Experiment::Evaluate(p)
        }
    };
    Ok(ExperimentSpec {
        seed: cli.seed.or(file.seed).unwrap_or(0),
        out: cli.out.or(file.out).unwrap_or_else(|| PathBuf::from("out")),
        experiment,
    })
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("WEAKDYN_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("WEAKDYN_THREADS must be a positive integer, got {v:?}")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|_| build_spec(cli)).and_then(|spec| match run(&spec) {
        Ok(record) => {
            println!("{}: wrote {} files to {}", spec.experiment.name(), record.outputs.len(), spec.out.display());
            Ok(())
        }
        Err(e) => {
            // best effort; the record also goes to stderr
            let _ = std::fs::write(spec.out.join("error.json"), error_record(&e).to_string());
            Err(e)
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_record(&e));
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
