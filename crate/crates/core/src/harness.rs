//! Replicated benchmark runs: `B` independent chains per length, each scored
//! by relative error against the true `Σ` and by whether the confidence
//! ellipsoid covers the true mean.
//!
//! Replicate `r` at length `M` draws from stream `derive_stream_id(M, r)` of
//! the master seed, so adding lengths never changes existing replicates, and
//! every method sees the same chain. Replicates run on a pool of `workers`
//! threads; per-replicate outcomes are collected in index order before
//! aggregation, so results do not depend on the worker count.
//!
//! Result CSV columns, in order:
//! `method,M,rel_err_mean,rel_err_se,coverage,coverage_se,fail_count,time_mean_s`.
//! Means and coverage are over replicates that did not fail. An undefined
//! field (a standard error with fewer than two successes, timing when not
//! requested) is left empty.

use crate::autocov::Chain;
use crate::baselines::{
    batch_means, default_batch_size, mtv_initial_seq, overlapping_batch_means, sv_bartlett,
    EstimatorConfig,
};
use crate::error::{Error, Result};
use crate::io::{read_chain_csv, write_text};
use crate::multivar::{
    mtv_mlse, region_contains, relative_error, AvarMatrix, Method, MomentlsOptions,
};
use crate::numerics::rng::derive_stream_id;
use crate::numerics::RngStream;
use crate::par::{map_indexed, with_workers, Execution};
use crate::simulate::var1::build_var1;
use crate::simulate::{build_mh_model, GroundTruth, MhParams, Model, Var1Preset};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const RESULT_HEADER: &str =
    "method,M,rel_err_mean,rel_err_se,coverage,coverage_se,fail_count,time_mean_s";

/// Where replicate chains come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelSpec {
    /// Either a preset id (`"1"`/`"mixed"`, `"2"`/`"positive"`) or an explicit
    /// diagonal with a constant off-diagonal and `Σ_ε = I`.
    Var1 {
        #[serde(default)]
        preset: Option<String>,
        #[serde(default)]
        diagonal: Option<Vec<f64>>,
        #[serde(default)]
        off_diagonal: f64,
    },
    /// Random Metropolis–Hastings model; `seed` defaults to the master seed.
    Mh {
        #[serde(default)]
        seed: Option<u64>,
        #[serde(default = "default_states")]
        states: usize,
        #[serde(default = "default_mh_dim")]
        dim: usize,
        #[serde(default = "default_rho")]
        rho: f64,
    },
    /// Pre-computed chains (replicate `r` reads `chains[r]`, truncated to `M`)
    /// with a supplied truth.
    External {
        chains: Vec<PathBuf>,
        sigma: Vec<Vec<f64>>,
        mu: Vec<f64>,
    },
}

fn default_states() -> usize {
    MhParams::default().states
}

fn default_mh_dim() -> usize {
    MhParams::default().dim
}

fn default_rho() -> f64 {
    MhParams::default().rho
}

fn default_alpha() -> f64 {
    0.05
}

fn default_workers() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub model: ModelSpec,
    /// Chain lengths `M`.
    pub lengths: Vec<usize>,
    /// Replicates `B` per length.
    pub replicates: usize,
    pub methods: Vec<EstimatorConfig>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    /// Record mean wall time per call. Off by default because timings differ
    /// between runs and would break byte-identical output.
    #[serde(default)]
    pub timing: bool,
}

impl BenchmarkConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: BenchmarkConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates < 1 {
            return Err(Error::invalid("replicate count must be at least 1"));
        }
        if self.lengths.is_empty() || self.lengths.iter().any(|&m| m < 4) {
            return Err(Error::invalid("every chain length must be at least 4"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid(format!(
                "alpha = {} outside (0, 1)",
                self.alpha
            )));
        }
        if self.workers < 1 {
            return Err(Error::invalid("worker count must be at least 1"));
        }
        if self.methods.is_empty() {
            return Err(Error::invalid("no methods configured"));
        }
        for &m in &self.lengths {
            for method in &self.methods {
                method.validate(m)?;
            }
        }
        if let ModelSpec::External { chains, .. } = &self.model {
            if chains.len() < self.replicates {
                return Err(Error::invalid(format!(
                    "{} replicates requested but only {} chain files given",
                    self.replicates,
                    chains.len()
                )));
            }
        }
        Ok(())
    }
}

/// Source of replicate chains plus the truth they are scored against.
pub enum ChainSource {
    Simulated(Model),
    External(Vec<PathBuf>),
}

impl ChainSource {
    fn chain(&self, len: usize, seed: u64, replicate: usize) -> Result<Chain> {
        match self {
            ChainSource::Simulated(model) => {
                let mut rng = RngStream::new(seed, derive_stream_id(len as u64, replicate as u64));
                model.simulate(len, &mut rng)
            }
            ChainSource::External(paths) => {
                let chain = read_chain_csv(&paths[replicate])?;
                if chain.len() < len {
                    return Err(Error::invalid(format!(
                        "{} has {} rows, fewer than M = {len}",
                        paths[replicate].display(),
                        chain.len()
                    )));
                }
                chain.head(len)
            }
        }
    }
}

/// Builds the chain source and ground truth for a model spec.
pub fn prepare_model(spec: &ModelSpec, master_seed: u64) -> Result<(ChainSource, GroundTruth)> {
    match spec {
        ModelSpec::Var1 {
            preset,
            diagonal,
            off_diagonal,
        } => {
            let model = match (preset, diagonal) {
                (Some(id), None) => Var1Preset::from_id(id)
                    .ok_or_else(|| Error::invalid(format!("unknown VAR(1) preset {id:?}")))?
                    .build()?,
                (None, Some(diag)) => build_var1(
                    diag,
                    *off_diagonal,
                    &DMatrix::identity(diag.len(), diag.len()),
                )?,
                _ => {
                    return Err(Error::invalid(
                        "VAR(1) model needs exactly one of preset or diagonal",
                    ))
                }
            };
            let model = Model::Var1(model);
            let truth = model.ground_truth()?;
            Ok((ChainSource::Simulated(model), truth))
        }
        ModelSpec::Mh {
            seed,
            states,
            dim,
            rho,
        } => {
            let model = Model::Mh(build_mh_model(MhParams {
                seed: seed.unwrap_or(master_seed),
                states: *states,
                dim: *dim,
                rho: *rho,
            })?);
            let truth = model.ground_truth()?;
            Ok((ChainSource::Simulated(model), truth))
        }
        ModelSpec::External { chains, sigma, mu } => {
            let d = mu.len();
            if d == 0 || sigma.len() != d || sigma.iter().any(|row| row.len() != d) {
                return Err(Error::invalid(
                    "external truth must be a d×d sigma with a length-d mu",
                ));
            }
            let sigma = DMatrix::from_fn(d, d, |i, j| sigma[i][j]);
            Ok((
                ChainSource::External(chains.clone()),
                GroundTruth {
                    sigma,
                    mu: mu.clone(),
                    atoms: None,
                },
            ))
        }
    }
}

/// Runs a configured estimator. `Method::Oracle` needs the truth and is
/// rejected here.
pub fn estimate_avar(chain: &Chain, config: &EstimatorConfig) -> Result<AvarMatrix> {
    config.validate(chain.len())?;
    let b = config
        .batch_size
        .unwrap_or_else(|| default_batch_size(chain.len(), chain.dim()));
    let with_batch = |sigma: DMatrix<f64>| AvarMatrix {
        batch_size: Some(b),
        ..AvarMatrix::new(sigma, config.method)
    };
    match config.method {
        Method::SvBartlett => sv_bartlett(chain, b).map(with_batch),
        Method::BatchMeans => batch_means(chain, b).map(with_batch),
        Method::OverlappingBatchMeans => overlapping_batch_means(chain, b).map(with_batch),
        Method::MtvInit => mtv_initial_seq(chain).map(|s| AvarMatrix::new(s, Method::MtvInit)),
        Method::MtvMlse => {
            let defaults = MomentlsOptions::default();
            let opts = MomentlsOptions {
                grid_size: config.grid_size.unwrap_or(defaults.grid_size),
                splits: config.delta_splits.unwrap_or(defaults.splits),
                execution: defaults.execution,
            };
            mtv_mlse(chain, &opts)
        }
        Method::Oracle => Err(Error::invalid(
            "the oracle method is only available in benchmarks",
        )),
    }
}

/// Anything the harness can score.
pub trait Estimator: Sync {
    fn label(&self) -> String;
    fn estimate(&self, chain: &Chain, truth: &GroundTruth) -> Result<DMatrix<f64>>;
}

impl Estimator for EstimatorConfig {
    /// The method name, with the batch size appended when it was fixed.
    fn label(&self) -> String {
        match self.batch_size {
            Some(b) => format!("{}[b={b}]", self.method),
            None => self.method.to_string(),
        }
    }

    fn estimate(&self, chain: &Chain, truth: &GroundTruth) -> Result<DMatrix<f64>> {
        match self.method {
            Method::Oracle => Ok(truth.sigma.clone()),
            _ => estimate_avar(chain, self).map(|a| a.sigma),
        }
    }
}

/// One aggregated row of the result table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub method: String,
    pub chain_len: usize,
    pub rel_err_mean: Option<f64>,
    pub rel_err_se: Option<f64>,
    pub coverage: Option<f64>,
    pub coverage_se: Option<f64>,
    pub fail_count: usize,
    pub time_mean_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkResult {
    pub rows: Vec<ResultRow>,
}

impl BenchmarkResult {
    pub fn row(&self, method: &str, chain_len: usize) -> Option<&ResultRow> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.chain_len == chain_len)
    }

    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut out = String::from(RESULT_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.method,
                r.chain_len,
                opt(r.rel_err_mean),
                opt(r.rel_err_se),
                opt(r.coverage),
                opt(r.coverage_se),
                r.fail_count,
                opt(r.time_mean_s)
            );
        }
        out
    }
}

pub fn write_results_csv(result: &BenchmarkResult, path: impl AsRef<Path>) -> Result<()> {
    write_text(path, &result.to_csv())
}

#[derive(Debug, Clone, Copy)]
struct Outcome {
    rel_err: f64,
    covered: bool,
    seconds: f64,
}

fn score(est: &dyn Estimator, chain: &Chain, truth: &GroundTruth, alpha: f64) -> Result<Outcome> {
    let start = Instant::now();
    let sigma = catch_unwind(AssertUnwindSafe(|| est.estimate(chain, truth)))
        .map_err(|_| Error::Degenerate(format!("{} panicked", est.label())))??;
    let seconds = start.elapsed().as_secs_f64();
    if sigma.shape() != truth.sigma.shape() || sigma.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("estimate"));
    }
    let rel_err = relative_error(&sigma, &truth.sigma)?;
    let covered = region_contains(&chain.mean(), &sigma, &truth.mu, chain.len(), alpha)?;
    Ok(Outcome {
        rel_err,
        covered,
        seconds,
    })
}

fn mean_and_se(values: &[f64]) -> (Option<f64>, Option<f64>) {
    let n = values.len();
    if n == 0 {
        return (None, None);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (Some(mean), None);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (Some(mean), Some((var / n as f64).sqrt()))
}

fn aggregate(
    label: String,
    chain_len: usize,
    outcomes: &[Option<Outcome>],
    timing: bool,
) -> ResultRow {
    let ok: Vec<Outcome> = outcomes.iter().flatten().copied().collect();
    let errs: Vec<f64> = ok.iter().map(|o| o.rel_err).collect();
    let hits: Vec<f64> = ok
        .iter()
        .map(|o| if o.covered { 1.0 } else { 0.0 })
        .collect();
    let (rel_err_mean, rel_err_se) = mean_and_se(&errs);
    let (coverage, coverage_se) = mean_and_se(&hits);
    let time_mean_s = if timing && !ok.is_empty() {
        Some(ok.iter().map(|o| o.seconds).sum::<f64>() / ok.len() as f64)
    } else {
        None
    };
    ResultRow {
        method: label,
        chain_len,
        rel_err_mean,
        rel_err_se,
        coverage,
        coverage_se,
        fail_count: outcomes.len() - ok.len(),
        time_mean_s,
    }
}

pub fn run_benchmark(config: &BenchmarkConfig) -> Result<BenchmarkResult> {
    let estimators: Vec<&dyn Estimator> =
        config.methods.iter().map(|m| m as &dyn Estimator).collect();
    run_benchmark_with(config, &estimators)
}

/// Like [`run_benchmark`] with arbitrary estimators in place of
/// `config.methods` (which is then ignored).
pub fn run_benchmark_with(
    config: &BenchmarkConfig,
    estimators: &[&dyn Estimator],
) -> Result<BenchmarkResult> {
    config.validate()?;
    let (source, truth) = prepare_model(&config.model, config.seed)?;
    if truth.sigma.nrows() != truth.mu.len() {
        return Err(Error::invalid("truth sigma and mu dimensions differ"));
    }
    let b = config.replicates;
    let mut rows = Vec::with_capacity(estimators.len() * config.lengths.len());
    let mut by_length = Vec::with_capacity(config.lengths.len());

    for &m in &config.lengths {
        log::info!("M = {m}: {b} replicates, {} methods", estimators.len());
        let per_rep: Vec<Vec<Option<Outcome>>> = with_workers(config.workers, || {
            map_indexed(b, Execution::Parallel, |r| {
                let chain = match source.chain(m, config.seed, r) {
                    Ok(c) => c,
                    Err(e) => {
                        log::warn!("M = {m}, replicate {r}: chain unavailable: {e}");
                        return vec![None; estimators.len()];
                    }
                };
                if chain.dim() != truth.mu.len() {
                    log::warn!(
                        "M = {m}, replicate {r}: chain dimension {} does not match the truth",
                        chain.dim()
                    );
                    return vec![None; estimators.len()];
                }
                estimators
                    .iter()
                    .map(|est| match score(*est, &chain, &truth, config.alpha) {
                        Ok(o) => Some(o),
                        Err(e) => {
                            log::debug!("M = {m}, replicate {r}, {}: {e}", est.label());
                            None
                        }
                    })
                    .collect()
            })
        });
        by_length.push((m, per_rep));
    }

    for (k, est) in estimators.iter().enumerate() {
        for (m, per_rep) in &by_length {
            let outcomes: Vec<Option<Outcome>> = per_rep.iter().map(|row| row[k]).collect();
            rows.push(aggregate(est.label(), *m, &outcomes, config.timing));
        }
    }
    Ok(BenchmarkResult { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(methods: Vec<EstimatorConfig>) -> BenchmarkConfig {
        BenchmarkConfig {
            model: ModelSpec::Var1 {
                preset: Some("1".into()),
                diagonal: None,
                off_diagonal: 0.0,
            },
            lengths: vec![500],
            replicates: 4,
            methods,
            alpha: 0.05,
            seed: 3,
            workers: 1,
            timing: false,
        }
    }

    #[test]
    fn oracle_has_zero_error() {
        let res = run_benchmark(&tiny(vec![EstimatorConfig::new(Method::Oracle)])).unwrap();
        assert_eq!(res.rows.len(), 1);
        let row = &res.rows[0];
        assert_eq!(row.rel_err_mean, Some(0.0));
        assert_eq!(row.fail_count, 0);
        assert!(row.coverage.unwrap() >= 0.0 && row.coverage.unwrap() <= 1.0);
    }

    #[test]
    fn single_replicate_has_no_se() {
        let mut cfg = tiny(vec![EstimatorConfig::new(Method::BatchMeans)]);
        cfg.replicates = 1;
        let res = run_benchmark(&cfg).unwrap();
        assert!(res.rows[0].rel_err_mean.is_some());
        assert_eq!(res.rows[0].rel_err_se, None);
        assert_eq!(res.rows[0].coverage_se, None);
        assert!(res.to_csv().lines().nth(1).unwrap().contains(",,"));
    }

    struct Flaky;

    impl Estimator for Flaky {
        fn label(&self) -> String {
            "flaky".into()
        }

        fn estimate(&self, chain: &Chain, truth: &GroundTruth) -> Result<DMatrix<f64>> {
            if chain.column(0)[0] > 0.0 {
                panic!("injected failure");
            }
            Ok(truth.sigma.clone())
        }
    }

    #[test]
    fn panics_are_isolated() {
        let cfg = tiny(vec![]);
        let bm = EstimatorConfig::new(Method::BatchMeans);
        let mut cfg = BenchmarkConfig {
            methods: vec![bm],
            ..cfg
        };
        cfg.replicates = 8;
        let alone = run_benchmark(&cfg).unwrap();
        let mixed = run_benchmark_with(&cfg, &[&Flaky, &bm]).unwrap();
        assert_eq!(mixed.rows[1], alone.rows[0]);
        let flaky = &mixed.rows[0];
        assert!(flaky.fail_count > 0 && flaky.fail_count < 8);
        assert_eq!(flaky.rel_err_mean, Some(0.0));
    }

    #[test]
    fn worker_count_does_not_change_output() {
        let methods = vec![
            EstimatorConfig::new(Method::BatchMeans),
            EstimatorConfig::new(Method::MtvInit),
        ];
        let one = run_benchmark(&tiny(methods.clone())).unwrap().to_csv();
        let four = run_benchmark(&BenchmarkConfig {
            workers: 4,
            ..tiny(methods)
        })
        .unwrap()
        .to_csv();
        assert_eq!(one, four);
    }

    #[test]
    fn config_json_defaults_and_validation() {
        let cfg = BenchmarkConfig::from_json(
            r#"{"model": {"kind": "mh", "states": 10, "dim": 2},
                "lengths": [100], "replicates": 2, "methods": [{"method": "bm"}]}"#,
        )
        .unwrap();
        assert_eq!(cfg.alpha, 0.05);
        assert_eq!(cfg.workers, 1);
        assert!(BenchmarkConfig::from_json(
            r#"{"model": {"kind": "var1", "preset": "1"}, "lengths": [2], "replicates": 1, "methods": [{"method": "bm"}]}"#
        )
        .is_err());
        assert!(BenchmarkConfig::from_json(
            r#"{"model": {"kind": "var1", "preset": "1"}, "lengths": [100], "replicates": 0, "methods": [{"method": "bm"}]}"#
        )
        .is_err());
    }

    #[test]
    fn rows_follow_config_order() {
        let mut cfg = tiny(vec![
            EstimatorConfig::new(Method::BatchMeans),
            EstimatorConfig::new(Method::Oracle),
        ]);
        cfg.lengths = vec![400, 200];
        cfg.replicates = 2;
        let res = run_benchmark(&cfg).unwrap();
        let keys: Vec<(String, usize)> = res
            .rows
            .iter()
            .map(|r| (r.method.clone(), r.chain_len))
            .collect();
        assert_eq!(
            keys,
            vec![
                ("bm".to_string(), 400),
                ("bm".to_string(), 200),
                ("oracle".to_string(), 400),
                ("oracle".to_string(), 200)
            ]
        );
    }
}
