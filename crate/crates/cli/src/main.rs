//! `momentvar` command-line tool.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or validation error,
//! 3 numerical failure. Payloads go to stdout or files; logs go to stderr.

use clap::{Args, Parser, Subcommand, ValueEnum};
use momentvar::baselines::EstimatorConfig;
use momentvar::harness::{estimate_avar, run_benchmark, write_results_csv, BenchmarkConfig};
use momentvar::io::{read_chain_csv, write_chain_csv, write_text};
use momentvar::numerics::RngStream;
use momentvar::numerics::{chi2_quantile, matrix_rows};
use momentvar::simulate::{build_mh_model, MhParams, Model, Var1Preset};
use momentvar::{Error, Method};
use serde_json::json;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const USAGE: u8 = 1;
const DATA: u8 = 2;
const NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(
    name = "momentvar",
    version,
    about = "Asymptotic variance estimation for MCMC output"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a chain and write it with a sidecar model/truth JSON.
    Simulate(SimulateArgs),
    /// Estimate the asymptotic variance matrix of a chain CSV.
    Estimate(EstimateArgs),
    /// Print the exact asymptotic variance of a model.
    Truth(ModelArgs),
    /// Run a replicated benchmark from a JSON config.
    Benchmark(BenchmarkArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelKind {
    Mh,
    Var1,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long, value_enum)]
    model: ModelKind,
    /// VAR(1): 1 (mixed signs) or 2 (all positive). MH: default.
    #[arg(long, default_value = "default")]
    preset: String,
    /// Seed for the random MH model and the simulated path.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// MH state space size.
    #[arg(long, default_value_t = MhParams::default().states)]
    states: usize,
    /// MH output dimension.
    #[arg(long, default_value_t = MhParams::default().dim)]
    dim: usize,
    /// MH correlation between neighbouring components of g.
    #[arg(long, default_value_t = MhParams::default().rho)]
    rho: f64,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    length: usize,
    /// Chain CSV path; the model JSON goes next to it with a `.json` extension
    /// unless `--model-out` is given.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    model_out: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateArgs {
    chain: PathBuf,
    /// One of sv-bartlett, bm, obm, mtv-init, mtv-mlse.
    #[arg(long, default_value = "mtv-mlse")]
    method: Method,
    /// Number of splits used to tune delta.
    #[arg(long = "delta-L", alias = "delta-splits", default_value_t = 5)]
    delta_splits: usize,
    #[arg(long, default_value_t = 1001)]
    grid_size: usize,
    /// Batch size (bm, obm) or truncation point (sv-bartlett); default floor(sqrt(M)).
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long)]
    json_out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchmarkArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Overrides the config's worker count.
    #[arg(long)]
    workers: Option<usize>,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: USAGE,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: if e.is_numerical() { NUMERICAL } else { DATA },
            message: e.to_string(),
        }
    }
}

type CliResult<T> = Result<T, Failure>;

fn build_model(args: &ModelArgs) -> CliResult<Model> {
    match args.model {
        ModelKind::Var1 => {
            let preset = Var1Preset::from_id(&args.preset).ok_or_else(|| {
                Failure::usage(format!(
                    "unknown var1 preset {:?} (expected 1 or 2)",
                    args.preset
                ))
            })?;
            Ok(Model::Var1(preset.build()?))
        }
        ModelKind::Mh => {
            if args.preset != "default" {
                return Err(Failure::usage(format!(
                    "unknown mh preset {:?} (expected default)",
                    args.preset
                )));
            }
            Ok(Model::Mh(build_mh_model(MhParams {
                seed: args.seed,
                states: args.states,
                dim: args.dim,
                rho: args.rho,
            })?))
        }
    }
}

fn to_json_text(value: &serde_json::Value) -> CliResult<String> {
    let mut text = serde_json::to_string_pretty(value).map_err(Error::from)?;
    text.push('\n');
    Ok(text)
}

fn emit(text: &str, path: Option<&Path>) -> CliResult<()> {
    match path {
        Some(p) => write_text(p, text).map_err(Failure::from),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn simulate(args: SimulateArgs) -> CliResult<()> {
    if args.length < 2 {
        return Err(Failure::usage("--length must be at least 2"));
    }
    let model = build_model(&args.model)?;
    let mut rng = RngStream::new(args.model.seed, 0);
    let chain = model.simulate(args.length, &mut rng)?;
    write_chain_csv(&chain, &args.out)?;
    let sidecar = args
        .model_out
        .unwrap_or_else(|| args.out.with_extension("json"));
    write_text(&sidecar, &to_json_text(&model.to_json()?)?)?;
    log::info!("wrote {} and {}", args.out.display(), sidecar.display());
    Ok(())
}

fn estimate(args: EstimateArgs) -> CliResult<()> {
    if args.method == Method::Oracle {
        return Err(Failure::usage(
            "the oracle method needs a known truth; use it in benchmarks",
        ));
    }
    if args.batch_size == Some(0) {
        return Err(Failure::usage("--batch-size must be positive"));
    }
    if args.delta_splits == 0 {
        return Err(Failure::usage("--delta-L must be positive"));
    }
    if args.grid_size < 3 {
        return Err(Failure::usage("--grid-size must be at least 3"));
    }
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        return Err(Failure::usage("--alpha must lie in (0, 1)"));
    }
    let chain = read_chain_csv(&args.chain)?;
    let config = EstimatorConfig {
        method: args.method,
        batch_size: args.batch_size,
        delta_splits: Some(args.delta_splits),
        grid_size: Some(args.grid_size),
    };
    let est = estimate_avar(&chain, &config)?;
    let d = est.dim();
    let mut out = json!({
        "method": est.method.name(),
        "d": d,
        "M": chain.len(),
        "sigma": matrix_rows(&est.sigma),
        "refined": est.refined,
        "avar_diagonal": (0..d).map(|i| est.sigma[(i, i)]).collect::<Vec<_>>(),
        "mean": chain.mean(),
        "alpha": args.alpha,
        "chi2_critical": chi2_quantile(1.0 - args.alpha, d as u32)?,
    });
    if let Some(delta) = &est.delta {
        out["delta"] = json!(delta);
    }
    if let Some(b) = est.batch_size {
        out["batch_size"] = json!(b);
    }
    emit(&to_json_text(&out)?, args.json_out.as_deref())
}

fn truth(args: ModelArgs) -> CliResult<()> {
    let model = build_model(&args)?;
    let t = model.ground_truth()?;
    let out = json!({
        "model": match args.model { ModelKind::Mh => "mh", ModelKind::Var1 => "var1" },
        "d": t.sigma.nrows(),
        "sigma": matrix_rows(&t.sigma),
        "mu": t.mu,
    });
    emit(&to_json_text(&out)?, None)
}

fn benchmark(args: BenchmarkArgs) -> CliResult<()> {
    let mut config = BenchmarkConfig::read(&args.config)?;
    if let Some(w) = args.workers {
        if w == 0 {
            return Err(Failure::usage("--workers must be positive"));
        }
        config.workers = w;
    }
    let result = run_benchmark(&config)?;
    write_results_csv(&result, &args.out)?;
    log::info!("wrote {} rows to {}", result.rows.len(), args.out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Estimate(a) => estimate(a),
        Command::Truth(a) => truth(a),
        Command::Benchmark(a) => benchmark(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
