//! Multivariate momentLS: cross-covariances by polarization, the element-wise
//! plug-in matrix, its spectral PSD refinement, and the evaluation metrics.

use crate::autocov::{combine_components, empirical_autocov, Chain, LagSequence, Sign};
use crate::error::{Error, Result};
use crate::momentls::{
    avar_from_measure, build_grid, project_momentls, tune_delta, univariate_avar, MomentMeasure,
    SupportGrid, DEFAULT_GRID_SIZE, DEFAULT_SPLITS, MAX_TUNED_DELTA,
};
use crate::numerics::eigen::{inverse_sqrt_spd, sym_eigen, EigenDecomposition, DEFAULT_TOL};
use crate::numerics::{asymmetry, chi2_quantile, symmetrize};
use crate::par::{map_indexed, Execution};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Estimator identifiers shared by the harness and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "sv-bartlett")]
    SvBartlett,
    #[serde(rename = "bm")]
    BatchMeans,
    #[serde(rename = "obm")]
    OverlappingBatchMeans,
    #[serde(rename = "mtv-init")]
    MtvInit,
    #[serde(rename = "mtv-mlse")]
    MtvMlse,
    /// Returns the known truth; only meaningful in benchmarks.
    #[serde(rename = "oracle")]
    Oracle,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::SvBartlett,
        Method::BatchMeans,
        Method::OverlappingBatchMeans,
        Method::MtvInit,
        Method::MtvMlse,
        Method::Oracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::SvBartlett => "sv-bartlett",
            Method::BatchMeans => "bm",
            Method::OverlappingBatchMeans => "obm",
            Method::MtvInit => "mtv-init",
            Method::MtvMlse => "mtv-mlse",
            Method::Oracle => "oracle",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        Method::ALL
            .into_iter()
            .find(|m| m.name() == lower)
            .ok_or_else(|| Error::invalid(format!("unknown method `{s}`")))
    }
}

/// Per-component half-gaps `δ_1..δ_d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaVector(Vec<f64>);

impl DeltaVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("empty delta vector"));
        }
        if let Some(bad) = values.iter().find(|v| !(**v > 0.0 && **v < 1.0)) {
            return Err(Error::invalid(format!("delta {bad} outside (0, 1)")));
        }
        Ok(DeltaVector(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `δ_ij = min(δ_i, δ_j)`.
    pub fn pair(&self, i: usize, j: usize) -> f64 {
        self.0[i].min(self.0[j])
    }
}

/// Tunes each component separately.
pub fn tune_delta_vector(chain: &Chain, splits: usize) -> Result<DeltaVector> {
    let values = (0..chain.dim())
        .map(|i| tune_delta(chain.column(i), splits).map(|d| d.value.min(MAX_TUNED_DELTA)))
        .collect::<Result<Vec<_>>>()?;
    DeltaVector::new(values)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentlsOptions {
    pub grid_size: usize,
    pub splits: usize,
    pub execution: Execution,
}

impl Default for MomentlsOptions {
    fn default() -> Self {
        MomentlsOptions {
            grid_size: DEFAULT_GRID_SIZE,
            splits: DEFAULT_SPLITS,
            execution: Execution::default(),
        }
    }
}

/// One filtered grid per distinct δ, shared by every projection of an estimate.
#[derive(Debug, Clone)]
pub struct GridCache {
    grids: Vec<SupportGrid>,
}

impl GridCache {
    pub fn new(grid_size: usize, deltas: &DeltaVector) -> Result<Self> {
        let mut grids: Vec<SupportGrid> = Vec::new();
        for &d in deltas.as_slice() {
            if !grids.iter().any(|g| g.delta() == d) {
                grids.push(build_grid(grid_size, d)?);
            }
        }
        Ok(GridCache { grids })
    }

    pub fn get(&self, delta: f64) -> &SupportGrid {
        self.grids
            .iter()
            .find(|g| g.delta() == delta)
            .expect("grid cache is built from the same delta vector")
    }
}

/// Fits of `a·g_i + b·g_j` and `a·g_i - b·g_j` at a common `δ_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedMomentPair {
    pub plus: MomentMeasure,
    pub minus: MomentMeasure,
    pub a: f64,
    pub b: f64,
    pub delta: f64,
}

impl SignedMomentPair {
    fn scale(&self) -> f64 {
        1.0 / (4.0 * self.a * self.b)
    }
}

/// Estimated cross-covariance sequence `γ̂_ij`.
#[derive(Debug, Clone, PartialEq)]
pub enum CrossCovEstimate {
    Auto(MomentMeasure),
    Pair(SignedMomentPair),
}

impl CrossCovEstimate {
    pub fn eval(&self, k: i64) -> f64 {
        match self {
            CrossCovEstimate::Auto(m) => m.eval(k),
            CrossCovEstimate::Pair(p) => p.scale() * (p.plus.eval(k) - p.minus.eval(k)),
        }
    }

    /// `Σ_k γ̂_ij(k)`.
    pub fn avar(&self) -> Result<f64> {
        match self {
            CrossCovEstimate::Auto(m) => avar_from_measure(m),
            CrossCovEstimate::Pair(p) => {
                Ok(p.scale() * (avar_from_measure(&p.plus)? - avar_from_measure(&p.minus)?))
            }
        }
    }

    /// The sequence as signed atoms `(α, weight)`.
    pub fn signed_atoms(&self) -> Vec<(f64, f64)> {
        match self {
            CrossCovEstimate::Auto(m) => m.signed_atoms(1.0),
            CrossCovEstimate::Pair(p) => {
                let mut atoms = p.plus.signed_atoms(p.scale());
                atoms.extend(p.minus.signed_atoms(-p.scale()));
                atoms
            }
        }
    }
}

fn column_sequences(chain: &Chain, exec: Execution) -> Result<Vec<LagSequence>> {
    let seqs = map_indexed(chain.dim(), exec, |i| empirical_autocov(chain.column(i)));
    let seqs = seqs.into_iter().collect::<Result<Vec<_>>>()?;
    for (i, r) in seqs.iter().enumerate() {
        if r.get(0) <= 0.0 {
            return Err(Error::Degenerate(format!(
                "component {} has zero empirical variance",
                i + 1
            )));
        }
    }
    Ok(seqs)
}

fn check_deltas(chain: &Chain, deltas: &DeltaVector) -> Result<()> {
    if deltas.len() != chain.dim() {
        return Err(Error::invalid(format!(
            "delta vector has {} entries for a {}-dimensional chain",
            deltas.len(),
            chain.dim()
        )));
    }
    Ok(())
}

fn fit_pair(
    chain: &Chain,
    i: usize,
    j: usize,
    a: f64,
    b: f64,
    delta: f64,
    grid: &SupportGrid,
) -> Result<SignedMomentPair> {
    let plus = combine_components(chain, i, j, a, b, Sign::Plus)?;
    let minus = combine_components(chain, i, j, a, b, Sign::Minus)?;
    Ok(SignedMomentPair {
        plus: project_momentls(&empirical_autocov(&plus)?, delta, grid)?,
        minus: project_momentls(&empirical_autocov(&minus)?, delta, grid)?,
        a,
        b,
        delta,
    })
}

/// `γ̂_ij` with the default weights `a = 1/√r_i(0)`, `b = 1/√r_j(0)`.
pub fn estimate_cross_cov(
    chain: &Chain,
    i: usize,
    j: usize,
    deltas: &DeltaVector,
    opts: &MomentlsOptions,
) -> Result<CrossCovEstimate> {
    check_deltas(chain, deltas)?;
    let d = chain.dim();
    if i >= d || j >= d {
        return Err(Error::invalid(format!(
            "component index out of range for d = {d}"
        )));
    }
    let ri = empirical_autocov(chain.column(i))?;
    let rj = empirical_autocov(chain.column(j))?;
    for (idx, r) in [(i, &ri), (j, &rj)] {
        if r.get(0) <= 0.0 {
            return Err(Error::Degenerate(format!(
                "component {} has zero empirical variance",
                idx + 1
            )));
        }
    }
    if i == j {
        let grid = build_grid(opts.grid_size, deltas.as_slice()[i])?;
        return Ok(CrossCovEstimate::Auto(project_momentls(
            &ri,
            deltas.as_slice()[i],
            &grid,
        )?));
    }
    estimate_cross_cov_weighted(
        chain,
        i,
        j,
        deltas,
        1.0 / ri.get(0).sqrt(),
        1.0 / rj.get(0).sqrt(),
        opts,
    )
}

/// `γ̂_ij` for `i ≠ j` with caller-supplied positive weights.
pub fn estimate_cross_cov_weighted(
    chain: &Chain,
    i: usize,
    j: usize,
    deltas: &DeltaVector,
    a: f64,
    b: f64,
    opts: &MomentlsOptions,
) -> Result<CrossCovEstimate> {
    check_deltas(chain, deltas)?;
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(Error::invalid(
            "polarization weights must be positive and finite",
        ));
    }
    let delta = deltas.pair(i, j);
    let grid = build_grid(opts.grid_size, delta)?;
    Ok(CrossCovEstimate::Pair(fit_pair(
        chain, i, j, a, b, delta, &grid,
    )?))
}

/// A `d × d` asymptotic variance estimate with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct AvarMatrix {
    pub sigma: DMatrix<f64>,
    pub method: Method,
    pub delta: Option<Vec<f64>>,
    /// Set when the spectral PSD refinement produced `sigma`.
    pub refined: bool,
    pub batch_size: Option<usize>,
}

impl AvarMatrix {
    pub fn new(sigma: DMatrix<f64>, method: Method) -> Self {
        AvarMatrix {
            sigma,
            method,
            delta: None,
            refined: false,
            batch_size: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.sigma.nrows()
    }
}

/// Element-wise plug-in estimate: diagonal from univariate fits, off-diagonal
/// `(s_i s_j / 4)(σ²₊ - σ²₋)` with `s_i = √r_i(0)`. Each entry is computed once
/// and mirrored.
pub fn sigma_pw(chain: &Chain, deltas: &DeltaVector, opts: &MomentlsOptions) -> Result<AvarMatrix> {
    check_deltas(chain, deltas)?;
    let d = chain.dim();
    let grids = GridCache::new(opts.grid_size, deltas)?;
    let seqs = column_sequences(chain, opts.execution)?;
    let scales: Vec<f64> = seqs.iter().map(|r| r.get(0).sqrt()).collect();

    let pairs: Vec<(usize, usize)> = (0..d).flat_map(|i| (i..d).map(move |j| (i, j))).collect();
    let entries = map_indexed(pairs.len(), opts.execution, |p| -> Result<f64> {
        let (i, j) = pairs[p];
        if i == j {
            let delta = deltas.as_slice()[i];
            return avar_from_measure(&project_momentls(&seqs[i], delta, grids.get(delta))?);
        }
        let delta = deltas.pair(i, j);
        let pair = fit_pair(
            chain,
            i,
            j,
            1.0 / scales[i],
            1.0 / scales[j],
            delta,
            grids.get(delta),
        )?;
        let diff = avar_from_measure(&pair.plus)? - avar_from_measure(&pair.minus)?;
        Ok(scales[i] * scales[j] / 4.0 * diff)
    });

    let mut sigma = DMatrix::zeros(d, d);
    for (&(i, j), value) in pairs.iter().zip(entries) {
        let v = value?;
        sigma[(i, j)] = v;
        sigma[(j, i)] = v;
    }
    Ok(AvarMatrix {
        sigma,
        method: Method::MtvMlse,
        delta: Some(deltas.as_slice().to_vec()),
        refined: false,
        batch_size: None,
    })
}

/// Spectral refinement: keeps the eigenvectors `U` of `Σ_pw` and re-estimates
/// each eigenvalue as the univariate momentLS variance of the rotated
/// component `Y·u_j` at `δ = min_i δ_i`.
pub fn sigma_psd(
    chain: &Chain,
    sigma_pw: &DMatrix<f64>,
    deltas: &DeltaVector,
    opts: &MomentlsOptions,
) -> Result<AvarMatrix> {
    check_deltas(chain, deltas)?;
    if sigma_pw.nrows() != chain.dim() || sigma_pw.ncols() != chain.dim() {
        return Err(Error::invalid(
            "plug-in matrix does not match the chain dimension",
        ));
    }
    let asym = asymmetry(sigma_pw);
    if asym > 1e-10 * sigma_pw.norm().max(1.0) {
        return Err(Error::NotSymmetric {
            asymmetry: asym,
            tolerance: 1e-10 * sigma_pw.norm().max(1.0),
        });
    }
    let eig = sym_eigen(sigma_pw, DEFAULT_TOL)?;
    let rotated = chain.transform(&eig.vectors)?;
    let delta = deltas.min();
    let grid = build_grid(opts.grid_size, delta)?;
    let lambdas = map_indexed(chain.dim(), opts.execution, |j| {
        univariate_avar(rotated.column(j), delta, &grid)
    });
    let lambdas = lambdas.into_iter().collect::<Result<Vec<_>>>()?;
    let refit = EigenDecomposition {
        values: DVector::from_vec(lambdas),
        vectors: eig.vectors,
    };
    Ok(AvarMatrix {
        sigma: refit.reconstruct(),
        method: Method::MtvMlse,
        delta: Some(deltas.as_slice().to_vec()),
        refined: true,
        batch_size: None,
    })
}

/// Whether a symmetric matrix counts as PSD for the refinement switch:
/// `λ_min ≥ -1e-10 · max(1, λ_max)`.
pub fn is_numerically_psd(sigma: &DMatrix<f64>) -> Result<bool> {
    let eig = sym_eigen(sigma, DEFAULT_TOL)?;
    Ok(eig.min_value() >= -1e-10 * eig.max_value().max(1.0))
}

/// `Σ_pw` when it is PSD, otherwise its spectral refinement.
pub fn momentls_avar(
    chain: &Chain,
    deltas: &DeltaVector,
    opts: &MomentlsOptions,
) -> Result<AvarMatrix> {
    let pw = sigma_pw(chain, deltas, opts)?;
    if is_numerically_psd(&pw.sigma)? {
        Ok(pw)
    } else {
        sigma_psd(chain, &pw.sigma, deltas, opts)
    }
}

/// Tunes `δ` per component and returns [`momentls_avar`].
pub fn mtv_mlse(chain: &Chain, opts: &MomentlsOptions) -> Result<AvarMatrix> {
    let deltas = tune_delta_vector(chain, opts.splits)?;
    momentls_avar(chain, &deltas, opts)
}

/// `‖Σ^{-1/2} (Σ̂ - Σ) Σ^{-1/2}‖_F`.
pub fn relative_error(estimate: &DMatrix<f64>, truth: &DMatrix<f64>) -> Result<f64> {
    if estimate.shape() != truth.shape() {
        return Err(Error::invalid("estimate and truth have different shapes"));
    }
    let w = inverse_sqrt_spd(truth)?;
    Ok((&w * (estimate - truth) * &w).norm())
}

/// `M (μ̂ - μ)ᵀ Σ̂⁻¹ (μ̂ - μ)`; errors when `Σ̂` is numerically singular.
pub fn region_statistic(
    mean_est: &[f64],
    sigma_est: &DMatrix<f64>,
    mu: &[f64],
    chain_len: usize,
) -> Result<f64> {
    let d = mean_est.len();
    if mu.len() != d || sigma_est.nrows() != d || sigma_est.ncols() != d {
        return Err(Error::invalid("dimension mismatch in confidence region"));
    }
    let eig = sym_eigen(sigma_est, DEFAULT_TOL)?;
    let (lmin, lmax) = (eig.min_value(), eig.max_value());
    if !(lmax > 0.0) || lmin <= 1e-12 * lmax {
        return Err(Error::NotPositiveDefinite(format!(
            "estimate is singular for the confidence region (eigenvalues {lmin:e}..{lmax:e})"
        )));
    }
    let diff = DVector::from_iterator(d, mean_est.iter().zip(mu).map(|(a, b)| a - b));
    let proj = eig.vectors.transpose() * diff;
    let q: f64 = proj
        .iter()
        .zip(eig.values.iter())
        .map(|(p, l)| p * p / l)
        .sum();
    Ok(chain_len as f64 * q)
}

/// Whether `μ` lies in the `1 - α` confidence ellipsoid around `μ̂`.
pub fn region_contains(
    mean_est: &[f64],
    sigma_est: &DMatrix<f64>,
    mu: &[f64],
    chain_len: usize,
    alpha: f64,
) -> Result<bool> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha = {alpha} outside (0, 1)")));
    }
    let stat = region_statistic(mean_est, sigma_est, mu, chain_len)?;
    Ok(stat < chi2_quantile(1.0 - alpha, mean_est.len() as u32)?)
}

/// Exact symmetrization helper re-exported for estimator assembly.
pub(crate) fn symmetric(m: &DMatrix<f64>) -> DMatrix<f64> {
    symmetrize(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngStream;
    use approx::assert_relative_eq;

    #[allow(clippy::needless_range_loop)]
    fn ar_chain(m: usize, coefs: &[f64], mix: f64, seed: u64) -> Chain {
        let mut rng = RngStream::new(seed, 0);
        let d = coefs.len();
        let mut state = vec![0.0; d];
        let mut cols = vec![vec![0.0; m]; d];
        for t in 0..m {
            let shared = rng.draw_normal();
            for i in 0..d {
                state[i] = coefs[i] * state[i] + rng.draw_normal() + mix * shared;
                cols[i][t] = state[i];
            }
        }
        Chain::from_columns(cols).unwrap()
    }

    fn opts() -> MomentlsOptions {
        MomentlsOptions::default()
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("nope".parse::<Method>().is_err());
    }

    #[test]
    fn delta_vector_validation() {
        assert!(DeltaVector::new(vec![0.1, 1.0]).is_err());
        assert!(DeltaVector::new(vec![]).is_err());
        let d = DeltaVector::new(vec![0.3, 0.1, 0.2]).unwrap();
        assert_eq!(d.min(), 0.1);
        assert_eq!(d.pair(0, 2), 0.2);
    }

    #[test]
    fn tune_vector_is_componentwise() {
        let chain = ar_chain(3000, &[0.7, -0.3, 0.9], 0.2, 1);
        let v = tune_delta_vector(&chain, 5).unwrap();
        for i in 0..3 {
            assert_eq!(
                v.as_slice()[i],
                tune_delta(chain.column(i), 5).unwrap().value
            );
        }
        let perm = Chain::from_columns(vec![
            chain.column(2).to_vec(),
            chain.column(0).to_vec(),
            chain.column(1).to_vec(),
        ])
        .unwrap();
        let pv = tune_delta_vector(&perm, 5).unwrap();
        assert_eq!(
            pv.as_slice(),
            &[v.as_slice()[2], v.as_slice()[0], v.as_slice()[1]]
        );
    }

    #[test]
    fn auto_branch_matches_univariate_projection() {
        let chain = ar_chain(2000, &[0.6, 0.2], 0.5, 2);
        let deltas = tune_delta_vector(&chain, 5).unwrap();
        let est = estimate_cross_cov(&chain, 0, 0, &deltas, &opts()).unwrap();
        let grid = build_grid(DEFAULT_GRID_SIZE, deltas.as_slice()[0]).unwrap();
        let direct = project_momentls(
            &empirical_autocov(chain.column(0)).unwrap(),
            deltas.as_slice()[0],
            &grid,
        )
        .unwrap();
        assert_eq!(est, CrossCovEstimate::Auto(direct));
    }

    #[test]
    fn duplicated_and_negated_columns() {
        let base = ar_chain(2000, &[0.6], 0.0, 3);
        let y = base.column(0).to_vec();
        let neg: Vec<f64> = y.iter().map(|v| -v).collect();
        let chain = Chain::from_columns(vec![y.clone(), y.clone(), neg]).unwrap();
        let deltas = DeltaVector::new(vec![0.2, 0.2, 0.2]).unwrap();
        let auto = estimate_cross_cov(&chain, 0, 0, &deltas, &opts()).unwrap();
        let dup = estimate_cross_cov(&chain, 0, 1, &deltas, &opts()).unwrap();
        let anti = estimate_cross_cov(&chain, 0, 2, &deltas, &opts()).unwrap();
        for k in 0..50 {
            let g = auto.eval(k);
            assert_relative_eq!(dup.eval(k), g, max_relative = 1e-8, epsilon = 1e-12);
            assert_relative_eq!(anti.eval(k), -g, max_relative = 1e-8, epsilon = 1e-12);
        }
        let pw = sigma_pw(
            &Chain::from_columns(vec![y.clone(), y]).unwrap(),
            &DeltaVector::new(vec![0.2, 0.2]).unwrap(),
            &opts(),
        )
        .unwrap();
        let s = pw.sigma[(0, 0)];
        for v in pw.sigma.iter() {
            assert_relative_eq!(*v, s, max_relative = 1e-8);
        }
    }

    #[test]
    fn cross_sequences_are_symmetric() {
        let chain = ar_chain(1500, &[0.5, 0.8], 0.7, 4);
        let deltas = tune_delta_vector(&chain, 5).unwrap();
        let a = estimate_cross_cov(&chain, 0, 1, &deltas, &opts()).unwrap();
        let b = estimate_cross_cov(&chain, 1, 0, &deltas, &opts()).unwrap();
        for k in -20..20 {
            assert_relative_eq!(a.eval(k), b.eval(k), max_relative = 1e-8, epsilon = 1e-12);
        }
    }

    #[test]
    fn univariate_reduction() {
        let chain = ar_chain(3000, &[0.5], 0.0, 5);
        let deltas = tune_delta_vector(&chain, 5).unwrap();
        let pw = sigma_pw(&chain, &deltas, &opts()).unwrap();
        let grid = build_grid(DEFAULT_GRID_SIZE, deltas.as_slice()[0]).unwrap();
        let uni = univariate_avar(chain.column(0), deltas.as_slice()[0], &grid).unwrap();
        assert_eq!(pw.sigma[(0, 0)], uni);
        assert_eq!(pw.sigma, pw.sigma.transpose());
    }

    #[test]
    fn degenerate_component_is_signaled() {
        let chain =
            Chain::from_columns(vec![vec![1.0, 2.0, 0.5, 1.5, 3.0, 2.2], vec![1.0; 6]]).unwrap();
        let deltas = DeltaVector::new(vec![0.2, 0.2]).unwrap();
        assert!(matches!(
            sigma_pw(&chain, &deltas, &opts()),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn psd_refinement_on_diagonal_input() {
        let chain = ar_chain(4000, &[0.5, -0.4, 0.7], 0.0, 6);
        let deltas = tune_delta_vector(&chain, 5).unwrap();
        let diag = DMatrix::from_diagonal(&nalgebra::dvector![1.0, 3.0, 2.0]);
        let psd = sigma_psd(&chain, &diag, &deltas, &opts()).unwrap();
        let grid = build_grid(DEFAULT_GRID_SIZE, deltas.min()).unwrap();
        assert!(psd.refined);
        for i in 0..3 {
            let uni = univariate_avar(chain.column(i), deltas.min(), &grid).unwrap();
            assert_relative_eq!(psd.sigma[(i, i)], uni, max_relative = 1e-10);
        }
        let off = psd
            .sigma
            .iter()
            .enumerate()
            .filter(|(n, _)| n % 4 != 0)
            .fold(0.0f64, |m, (_, v)| m.max(v.abs()));
        assert!(off < 1e-12);
    }

    #[test]
    fn psd_refinement_output_is_psd() {
        let chain = ar_chain(1000, &[0.3, 0.6], 0.9, 7);
        let deltas = tune_delta_vector(&chain, 5).unwrap();
        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let psd = sigma_psd(&chain, &indefinite, &deltas, &opts()).unwrap();
        assert_eq!(psd.sigma, psd.sigma.transpose());
        let eig = sym_eigen(&psd.sigma, DEFAULT_TOL).unwrap();
        assert!(eig.min_value() >= -1e-10);
    }

    #[test]
    fn relative_error_cases() {
        let truth = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        assert!(relative_error(&truth, &truth).unwrap() < 1e-14);
        assert_relative_eq!(
            relative_error(&(&truth * 2.0), &truth).unwrap(),
            2f64.sqrt(),
            max_relative = 1e-12
        );
        assert_relative_eq!(
            relative_error(&DMatrix::zeros(2, 2), &truth).unwrap(),
            2f64.sqrt(),
            max_relative = 1e-12
        );
        assert!(relative_error(
            &truth,
            &DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])
        )
        .is_err());
    }

    #[test]
    fn region_cases() {
        let one = DMatrix::from_element(1, 1, 1.0);
        assert!(region_contains(&[0.3], &one, &[0.3], 100, 0.05).unwrap());
        assert!(!region_contains(&[0.2], &one, &[0.0], 100, 0.05).unwrap());
        assert!(region_contains(&[0.19], &one, &[0.0], 100, 0.05).unwrap());
        let singular = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(region_contains(&[0.0, 0.0], &singular, &[0.0, 0.0], 10, 0.05).is_err());
        assert!(region_contains(&[0.0], &one, &[0.0], 10, 1.0).is_err());
    }

    #[test]
    fn region_statistic_is_affine_invariant() {
        let sigma = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 0.5]);
        let t = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, -0.5, 3.0]);
        let (mh, mu) = (
            DVector::from_vec(vec![0.1, -0.2]),
            DVector::from_vec(vec![0.05, 0.1]),
        );
        let base = region_statistic(mh.as_slice(), &sigma, mu.as_slice(), 50).unwrap();
        let ts = symmetric(&(&t * &sigma * t.transpose()));
        let moved =
            region_statistic((&t * &mh).as_slice(), &ts, (&t * &mu).as_slice(), 50).unwrap();
        assert_relative_eq!(base, moved, max_relative = 1e-8);
    }
}
