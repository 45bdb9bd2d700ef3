//! Univariate moment least squares.
//!
//! An autocovariance sequence of a reversible chain is a moment sequence
//! `m(k) = ∫ α^|k| μ(dα)` of a nonnegative measure on `(-1, 1)`. Given an
//! empirical sequence `r`, [`project_momentls`] finds the `ℓ₂(ℤ)`-closest
//! moment sequence whose measure lives on a grid inside `[-1 + δ, 1 - δ]`,
//! and [`avar_from_measure`] turns the fitted atoms into the asymptotic
//! variance `Σ w (1 + α) / (1 - α)`.

use crate::autocov::{centered, empirical_autocov, LagSequence};
use crate::error::{Error, Result};
use crate::numerics::nnls::{nnls_qp_gram, Gram, NnlsOptions};

/// Points in the initial uniform grid on `[-1, 1]`.
pub const DEFAULT_GRID_SIZE: usize = 1001;
/// Number of splits used by [`tune_delta`].
pub const DEFAULT_SPLITS: usize = 5;
/// Shrinkage applied to the averaged per-split estimates.
pub const DELTA_SHRINKAGE: f64 = 0.8;
/// Tuned values are capped here before building a grid.
pub const MAX_TUNED_DELTA: f64 = 0.99;

// Truncate the lag sum once |α|^(K+1) / (1 - |α|) falls below this.
const TAIL_EPS: f64 = 1.0 / (1u64 << 56) as f64;
const GRID_SLACK: f64 = 4.0 * f64::EPSILON;

/// Sorted candidate support points inside `[-1 + δ, 1 - δ]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportGrid {
    points: Vec<f64>,
    delta: f64,
}

impl SupportGrid {
    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Uniform grid of `s0` points spanning `[-1 + δ, 1 - δ]` itself, for
    /// callers that do not start from a shared grid on `[-1, 1]`.
    pub fn spanning(s0: usize, delta: f64) -> Result<SupportGrid> {
        check_delta(delta)?;
        if s0 < 2 {
            return Err(Error::invalid("grid needs at least 2 points"));
        }
        let half = 1.0 - delta;
        let points = (0..s0)
            .map(|i| half * (2.0 * i as f64 - (s0 - 1) as f64) / (s0 - 1) as f64)
            .collect();
        Ok(SupportGrid { points, delta })
    }

    /// Grid from explicit points, filtered to `[-1 + δ, 1 - δ]`.
    pub fn from_points(mut points: Vec<f64>, delta: f64) -> Result<SupportGrid> {
        check_delta(delta)?;
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("grid"));
        }
        points.retain(|p| p.abs() <= 1.0 - delta + GRID_SLACK && p.abs() < 1.0);
        points.sort_by(f64::total_cmp);
        points.dedup();
        if points.is_empty() {
            return Err(Error::invalid(format!(
                "no grid point survives delta = {delta}"
            )));
        }
        Ok(SupportGrid { points, delta })
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!(
            "delta = {delta} must lie in (0, 1)"
        )));
    }
    Ok(())
}

/// Uniform `s0`-point grid on `[-1, 1]` filtered to `|α| ≤ 1 - δ`.
pub fn build_grid(s0: usize, delta: f64) -> Result<SupportGrid> {
    if s0 < 3 {
        return Err(Error::invalid(format!("grid size {s0} is below 3")));
    }
    check_delta(delta)?;
    // integer numerators keep the grid exactly symmetric with 0 on it for odd s0
    let denom = (s0 - 1) as f64;
    let points = (0..s0).map(|i| (2.0 * i as f64 - denom) / denom).collect();
    SupportGrid::from_points(points, delta)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub support: f64,
    pub weight: f64,
}

/// Discrete nonnegative measure representing a fitted moment sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentMeasure {
    atoms: Vec<Atom>,
    delta: f64,
}

impl MomentMeasure {
    pub fn empty(delta: f64) -> Self {
        MomentMeasure {
            atoms: Vec::new(),
            delta,
        }
    }

    /// Measure from explicit atoms; zero weights are dropped.
    pub fn new(atoms: Vec<Atom>, delta: f64) -> Result<Self> {
        for a in &atoms {
            if !a.support.is_finite() || !a.weight.is_finite() {
                return Err(Error::NonFinite("measure atoms"));
            }
            if a.weight < 0.0 {
                return Err(Error::invalid("atom weights must be nonnegative"));
            }
        }
        Ok(MomentMeasure {
            atoms: atoms.into_iter().filter(|a| a.weight > 0.0).collect(),
            delta,
        })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn eval(&self, k: i64) -> f64 {
        eval_sequence(self, k)
    }

    /// Atoms as `(support, weight)` pairs scaled by `c`, for assembling
    /// signed combinations of measures.
    pub fn signed_atoms(&self, c: f64) -> Vec<(f64, f64)> {
        self.atoms
            .iter()
            .map(|a| (a.support, c * a.weight))
            .collect()
    }
}

/// `m(k) = Σ w α^|k|`, with `0⁰ = 1`.
pub fn eval_sequence(measure: &MomentMeasure, k: i64) -> f64 {
    let p = k.unsigned_abs().min(i32::MAX as u64) as i32;
    measure
        .atoms
        .iter()
        .map(|a| a.weight * a.support.powi(p))
        .sum()
}

/// Closed-form asymptotic variance `Σ w (1 + α) / (1 - α)`.
pub fn avar_from_measure(measure: &MomentMeasure) -> Result<f64> {
    let mut total = 0.0;
    for a in &measure.atoms {
        if a.support.abs() >= 1.0 {
            return Err(Error::invalid(format!(
                "atom at {} lies outside (-1, 1)",
                a.support
            )));
        }
        total += a.weight * (1.0 + a.support) / (1.0 - a.support);
    }
    Ok(total)
}

/// `Σ_{k∈ℤ} (Σ_p w_p α_p^|k|)²` for a signed combination of atoms.
pub fn signed_squared_norm(atoms: &[(f64, f64)]) -> f64 {
    let mut total = 0.0;
    for &(a, wa) in atoms {
        for &(b, wb) in atoms {
            let ab = a * b;
            total += wa * wb * (1.0 + ab) / (1.0 - ab);
        }
    }
    total.max(0.0)
}

/// `ℓ₂(ℤ)` distance between two moment-type sequences given as signed atoms.
pub fn signed_l2_distance(x: &[(f64, f64)], y: &[(f64, f64)]) -> f64 {
    let mut diff: Vec<(f64, f64)> = x.to_vec();
    diff.extend(y.iter().map(|&(a, w)| (a, -w)));
    signed_squared_norm(&diff).sqrt()
}

/// `Σ_{k∈ℤ} (r(k) - m(k))²` with `r` zero beyond its stored lags.
pub fn projection_loss(r: &LagSequence, measure: &MomentMeasure) -> f64 {
    let n = r.values().len();
    let mut inside = 0.0;
    for (k, rk) in r.values().iter().enumerate() {
        let e = rk - measure.eval(k as i64);
        inside += if k == 0 { e * e } else { 2.0 * e * e };
    }
    // tail of m beyond the stored lags
    let mut tail = 0.0;
    for a in measure.atoms() {
        for b in measure.atoms() {
            let ab = a.support * b.support;
            tail += a.weight * b.weight * ab.powi(n as i32) / (1.0 - ab);
        }
    }
    inside + 2.0 * tail
}

/// Gram matrix of the moment features: `B_ij = Σ_k (α_i α_j)^|k| = (1 + α_i α_j)/(1 - α_i α_j)`.
pub struct MomentGram<'a> {
    alphas: &'a [f64],
}

impl<'a> MomentGram<'a> {
    pub fn new(alphas: &'a [f64]) -> Self {
        MomentGram { alphas }
    }
}

impl Gram for MomentGram<'_> {
    fn dim(&self) -> usize {
        self.alphas.len()
    }

    fn entry(&self, i: usize, j: usize) -> f64 {
        let ab = self.alphas[i] * self.alphas[j];
        (1.0 + ab) / (1.0 - ab)
    }
}

fn lag_cutoff(alpha: f64, max_lag: usize) -> usize {
    let x = alpha.abs();
    if x == 0.0 {
        return 0;
    }
    let k = ((TAIL_EPS * (1.0 - x)).ln() / x.ln()).ceil();
    if k.is_finite() && k >= 0.0 {
        (k as usize).min(max_lag)
    } else {
        max_lag
    }
}

/// `a_i = Σ_{k∈ℤ} α_i^|k| r(k) = r(0) + 2 Σ_{k≥1} α_i^k r(k)`, summed by Horner
/// up to the lag where the geometric tail is below double precision.
pub fn moment_inner_products(r: &LagSequence, alphas: &[f64]) -> Vec<f64> {
    let vals = r.values();
    let max_lag = vals.len() - 1;
    alphas
        .iter()
        .map(|&alpha| {
            let cutoff = lag_cutoff(alpha, max_lag);
            let mut acc = 0.0;
            for k in (1..=cutoff).rev() {
                acc = (acc + vals[k]) * alpha;
            }
            vals[0] + 2.0 * acc
        })
        .collect()
}

/// Result of one projection with solver diagnostics.
#[derive(Debug, Clone)]
pub struct ProjectionFit {
    pub measure: MomentMeasure,
    pub iterations: usize,
    pub kkt_violation: f64,
}

/// Projects `r` onto the moment cone over `grid`.
pub fn project_momentls(r: &LagSequence, delta: f64, grid: &SupportGrid) -> Result<MomentMeasure> {
    project_with_diagnostics(r, delta, grid).map(|f| f.measure)
}

pub fn project_with_diagnostics(
    r: &LagSequence,
    delta: f64,
    grid: &SupportGrid,
) -> Result<ProjectionFit> {
    check_delta(delta)?;
    if grid.is_empty() {
        return Err(Error::invalid("empty support grid"));
    }
    let max_abs = grid.points().iter().fold(0.0f64, |m, p| m.max(p.abs()));
    if max_abs > 1.0 - delta + GRID_SLACK || max_abs >= 1.0 {
        return Err(Error::invalid(format!(
            "grid reaches |α| = {max_abs}, beyond 1 - delta = {}",
            1.0 - delta
        )));
    }
    if r.get(0) == 0.0 {
        // constant chain
        return Ok(ProjectionFit {
            measure: MomentMeasure::empty(delta),
            iterations: 0,
            kkt_violation: 0.0,
        });
    }

    let alphas = grid.points();
    let a = moment_inner_products(r, alphas);
    let a_inf = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if a_inf == 0.0 {
        return Ok(ProjectionFit {
            measure: MomentMeasure::empty(delta),
            iterations: 0,
            kkt_violation: 0.0,
        });
    }
    // tolerance proportional to ‖a‖∞ so the fit is positively homogeneous in r
    let opts = NnlsOptions {
        tol: Some(1e-10 * a_inf),
        max_iter: None,
    };
    let sol = nnls_qp_gram(&a, &MomentGram::new(alphas), opts)?;
    let atoms = sol
        .weights
        .as_slice()
        .iter()
        .zip(alphas)
        .filter(|(w, _)| **w > 0.0)
        .map(|(&weight, &support)| Atom { support, weight })
        .collect();
    Ok(ProjectionFit {
        measure: MomentMeasure { atoms, delta },
        iterations: sol.iterations,
        kkt_violation: sol.kkt_violation(),
    })
}

/// Empirical autocovariance, projection, and closed-form variance in one step.
pub fn univariate_avar(y: &[f64], delta: f64, grid: &SupportGrid) -> Result<f64> {
    let r = empirical_autocov(y)?;
    avar_from_measure(&project_momentls(&r, delta, grid)?)
}

/// Tuned `δ` with the per-split values it was averaged from.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaEstimate {
    pub value: f64,
    pub per_split: Vec<f64>,
    pub batch_size: usize,
}

/// Per-split estimate from the first even `t` with `r̃(t + 2) ≤ 0`.
///
/// `None` (no sign change within the split) falls to the floor `1/B`;
/// `Some(0)` takes the limit `δ = 1`.
pub fn split_delta(first_crossing: Option<usize>, batch: usize) -> f64 {
    let floor = 1.0 / batch as f64;
    match first_crossing {
        None => floor,
        Some(0) => 1.0,
        Some(m) => (1.0 - (-(batch as f64).ln() / (2.0 * m as f64)).exp()).max(floor),
    }
}

/// Data-driven `δ` from `L` splits of the chain.
///
/// The chain is centered once at its global mean. For each split `l` the
/// lag-`k` autocovariance sums over `t ∈ [(l-1)B - k, lB - 1 - k]` (the first
/// split over `t ∈ [0, B - 1 - k]`), and only even lags are evaluated, lazily,
/// until the first nonpositive one.
pub fn tune_delta(y: &[f64], splits: usize) -> Result<DeltaEstimate> {
    if splits < 1 {
        return Err(Error::invalid("number of splits must be at least 1"));
    }
    let m = y.len();
    if m < 2 * splits {
        return Err(Error::invalid(format!(
            "chain length {m} is below 2L = {}",
            2 * splits
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("chain"));
    }
    let yc = centered(y);
    let batch = m / splits;

    let per_split: Vec<f64> = (1..=splits)
        .map(|l| {
            let split_cov = |k: usize| -> f64 {
                let start = if l == 1 { 0 } else { (l - 1) * batch - k };
                let end = l * batch - 1 - k;
                let s: f64 = (start..=end).map(|t| yc[t] * yc[t + k]).sum();
                s / batch as f64
            };
            let crossing = (0..)
                .step_by(2)
                .take_while(|t| t + 2 < batch)
                .find(|&t| split_cov(t + 2) <= 0.0);
            split_delta(crossing, batch)
        })
        .collect();

    let value = DELTA_SHRINKAGE * per_split.iter().sum::<f64>() / splits as f64;
    Ok(DeltaEstimate {
        value,
        per_split,
        batch_size: batch,
    })
}
