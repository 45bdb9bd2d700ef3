//! Classical comparison estimators: spectral variance with the modified
//! Bartlett window, batch means, overlapping batch means, and the
//! multivariate initial sequence estimator.
//!
//! Every estimator fills the upper triangle and mirrors it, so outputs are
//! exactly symmetric.

use crate::autocov::{autocov_matrix_up_to, centered, lag_product_sum, Chain};
use crate::error::{Error, Result};
use crate::multivar::{symmetric, Method};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Which estimator to run and its optional tuning values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub method: Method,
    /// Batch size (BM, OBM) or truncation point (SV); `None` uses
    /// [`default_batch_size`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    /// Number of splits for δ tuning (momentLS).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_splits: Option<usize>,
    /// Initial grid size (momentLS).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_size: Option<usize>,
}

impl EstimatorConfig {
    pub fn new(method: Method) -> Self {
        EstimatorConfig {
            method,
            batch_size: None,
            delta_splits: None,
            grid_size: None,
        }
    }

    pub fn validate(&self, chain_len: usize) -> Result<()> {
        if let Some(b) = self.batch_size {
            if b < 1 || b + 1 > chain_len {
                return Err(Error::invalid(format!(
                    "batch size {b} outside [1, {}]",
                    chain_len.saturating_sub(1)
                )));
            }
        }
        if self.delta_splits == Some(0) {
            return Err(Error::invalid("delta splits must be at least 1"));
        }
        Ok(())
    }
}

/// `floor(√M)` clamped to `[2, M/2]`.
pub fn default_batch_size(chain_len: usize, _dim: usize) -> usize {
    let mut b = (chain_len as f64).sqrt().floor() as usize;
    // guard against sqrt rounding on perfect squares
    while (b + 1) * (b + 1) <= chain_len {
        b += 1;
    }
    while b * b > chain_len {
        b -= 1;
    }
    b.clamp(2, (chain_len / 2).max(2))
}

fn upper_to_full(d: usize, mut entry: impl FnMut(usize, usize) -> f64) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            let v = entry(i, j);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

/// `Σ_{|k|<b} (1 - |k|/b) R(k)`.
pub fn sv_bartlett(chain: &Chain, b: usize) -> Result<DMatrix<f64>> {
    let m = chain.len();
    if b < 1 || b > m {
        return Err(Error::invalid(format!(
            "truncation point {b} outside [1, {m}]"
        )));
    }
    let lags = autocov_matrix_up_to(chain, b - 1);
    let d = chain.dim();
    Ok(upper_to_full(d, |i, j| {
        let mut s = lags.entry(0, i, j);
        for k in 1..b {
            let w = 1.0 - k as f64 / b as f64;
            s += w * (lags.entry(k, i, j) + lags.entry(k, j, i));
        }
        s
    }))
}

/// Non-overlapping batch means; trailing iterates that do not fill a batch
/// are dropped.
pub fn batch_means(chain: &Chain, b: usize) -> Result<DMatrix<f64>> {
    let m = chain.len();
    if b < 1 {
        return Err(Error::invalid("batch size must be positive"));
    }
    let a = m / b;
    if a < 2 {
        return Err(Error::invalid(format!(
            "batch size {b} leaves {a} batches; need at least 2"
        )));
    }
    let d = chain.dim();
    let devs: Vec<Vec<f64>> = chain
        .columns()
        .iter()
        .map(|c| {
            let grand = crate::autocov::mean(c);
            (0..a)
                .map(|j| c[j * b..(j + 1) * b].iter().sum::<f64>() / b as f64 - grand)
                .collect()
        })
        .collect();
    let scale = b as f64 / (a - 1) as f64;
    Ok(upper_to_full(d, |i, j| {
        scale
            * devs[i]
                .iter()
                .zip(&devs[j])
                .map(|(x, y)| x * y)
                .sum::<f64>()
    }))
}

/// Overlapping batch means over all `M - b + 1` windows of length `b`.
pub fn overlapping_batch_means(chain: &Chain, b: usize) -> Result<DMatrix<f64>> {
    let m = chain.len();
    if b < 1 || b >= m {
        return Err(Error::invalid(format!(
            "batch size {b} outside [1, {}]",
            m - 1
        )));
    }
    let d = chain.dim();
    let windows = m - b + 1;
    // window means of the centered chain via running sums, re-summed every
    // batch so error does not accumulate
    let devs: Vec<Vec<f64>> = chain
        .columns()
        .iter()
        .map(|c| {
            let yc = centered(c);
            let mut out = Vec::with_capacity(windows);
            let mut s: f64 = yc[..b].iter().sum();
            out.push(s / b as f64);
            for j in 1..windows {
                if j % b == 0 {
                    s = yc[j..j + b].iter().sum();
                } else {
                    s += yc[j + b - 1] - yc[j - 1];
                }
                out.push(s / b as f64);
            }
            out
        })
        .collect();
    let scale = (m * b) as f64 / ((m - b) as f64 * (m - b + 1) as f64);
    Ok(upper_to_full(d, |i, j| {
        scale
            * devs[i]
                .iter()
                .zip(&devs[j])
                .map(|(x, y)| x * y)
                .sum::<f64>()
    }))
}

/// Multivariate initial sequence estimator.
///
/// With symmetrized lags `R̃(k)` and pair sums `Γ_m = R̃(2m) + R̃(2m+1)`, the
/// candidates are `Σ̂_m = -R̃(0) + 2 Σ_{l≤m} Γ_l`. The sequence starts at the
/// first positive definite `Σ̂_m` and keeps adding pairs while the
/// generalized variance `det Σ̂_m` strictly increases. For `d = 1` this is the
/// initial positive sequence truncation.
pub fn mtv_initial_seq(chain: &Chain) -> Result<DMatrix<f64>> {
    let m = chain.len();
    if m < 4 {
        return Err(Error::invalid(format!("chain length {m} is below 4")));
    }
    let d = chain.dim();
    let cols: Vec<Vec<f64>> = chain.columns().iter().map(|c| centered(c)).collect();
    let lag = |k: usize| -> DMatrix<f64> {
        let raw = DMatrix::from_fn(d, d, |i, j| {
            lag_product_sum(&cols[i], &cols[j], k) / m as f64
        });
        symmetric(&raw)
    };
    let pair = |l: usize| -> DMatrix<f64> { lag(2 * l) + lag(2 * l + 1) };
    let max_pair = (m - 2) / 2;

    let r0 = lag(0);
    let mut sigma = -&r0 + pair(0) * 2.0;
    let mut l = 0;
    while !is_positive_definite(&sigma) {
        l += 1;
        if l > max_pair {
            return Err(Error::Degenerate(
                "no positive definite partial sum in the initial sequence".into(),
            ));
        }
        sigma += pair(l) * 2.0;
    }
    let mut det = sigma.determinant();
    while l < max_pair {
        let next = &sigma + pair(l + 1) * 2.0;
        let next_det = next.determinant();
        if next_det <= det {
            break;
        }
        sigma = next;
        det = next_det;
        l += 1;
    }
    Ok(symmetric(&sigma))
}

fn is_positive_definite(m: &DMatrix<f64>) -> bool {
    m.clone().cholesky().is_some()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autocov::empirical_autocov_matrix;
    use crate::numerics::RngStream;
    use approx::assert_relative_eq;

    fn uni(v: &[f64]) -> Chain {
        Chain::univariate(v.to_vec()).unwrap()
    }

    #[allow(clippy::needless_range_loop)]
    fn noisy(m: usize, d: usize, seed: u64) -> Chain {
        let mut rng = RngStream::new(seed, 0);
        let mut cols = vec![vec![0.0; m]; d];
        let mut x = vec![0.0; d];
        for t in 0..m {
            let z = rng.draw_normal();
            for i in 0..d {
                x[i] = 0.5 * x[i] + rng.draw_normal() + 0.3 * z;
                cols[i][t] = x[i];
            }
        }
        Chain::from_columns(cols).unwrap()
    }

    #[test]
    fn batch_size_defaults() {
        assert_eq!(default_batch_size(10_000, 1), 100);
        assert_eq!(default_batch_size(4, 1), 2);
        assert_eq!(default_batch_size(50, 3), 7);
        assert_eq!(default_batch_size(5, 1), 2);
    }

    #[test]
    fn sv_cases() {
        let chain = noisy(300, 3, 1);
        let r0 = empirical_autocov_matrix(&chain).at(0);
        assert!((sv_bartlett(&chain, 1).unwrap() - r0).amax() < 1e-14);
        let alt = uni(&[1.0, -1.0, 1.0, -1.0]);
        assert_relative_eq!(sv_bartlett(&alt, 2).unwrap()[(0, 0)], 0.25, epsilon = 1e-15);
        assert_eq!(sv_bartlett(&uni(&[2.5; 6]), 3).unwrap()[(0, 0)], 0.0);
        assert!(sv_bartlett(&alt, 0).is_err());
        assert!(sv_bartlett(&alt, 5).is_err());
    }

    #[test]
    fn bm_cases() {
        assert_eq!(
            batch_means(&uni(&[0.0, 0.0, 2.0, 2.0]), 2).unwrap()[(0, 0)],
            4.0
        );
        assert_eq!(batch_means(&uni(&[2.5; 9]), 3).unwrap()[(0, 0)], 0.0);
        assert!(batch_means(&uni(&[1.0, 2.0, 3.0]), 2).is_err());
        let base = noisy(200, 1, 2);
        let y = base.column(0).to_vec();
        let dup = Chain::from_columns(vec![y.clone(), y]).unwrap();
        let s = batch_means(&dup, 10).unwrap();
        assert!(s.iter().all(|v| *v == s[(0, 0)]));
    }

    #[test]
    fn obm_cases() {
        assert_eq!(
            overlapping_batch_means(&uni(&[0.0, 2.0]), 1).unwrap()[(0, 0)],
            2.0
        );
        assert_eq!(
            overlapping_batch_means(&uni(&[2.5; 9]), 3).unwrap()[(0, 0)],
            0.0
        );
        let chain = noisy(50, 2, 3);
        let s = overlapping_batch_means(&chain, 49).unwrap();
        assert!(s.iter().all(|v| v.is_finite()));
        assert_eq!(s, s.transpose());
        assert!(overlapping_batch_means(&chain, 50).is_err());
    }

    #[test]
    fn obm_running_sums_match_direct_windows() {
        let chain = noisy(500, 1, 4);
        let b = 37;
        let y = centered(chain.column(0));
        let m = y.len();
        let direct: f64 = (0..=m - b)
            .map(|j| {
                let w = y[j..j + b].iter().sum::<f64>() / b as f64;
                w * w
            })
            .sum::<f64>()
            * (m * b) as f64
            / ((m - b) as f64 * (m - b + 1) as f64);
        assert_relative_eq!(
            overlapping_batch_means(&chain, b).unwrap()[(0, 0)],
            direct,
            max_relative = 1e-12
        );
    }

    #[test]
    fn all_estimators_exactly_symmetric() {
        for seed in 0..5 {
            let chain = noisy(400, 4, 10 + seed);
            for s in [
                sv_bartlett(&chain, 20).unwrap(),
                batch_means(&chain, 20).unwrap(),
                overlapping_batch_means(&chain, 20).unwrap(),
                mtv_initial_seq(&chain).unwrap(),
            ] {
                assert_eq!(s, s.transpose());
            }
        }
    }

    #[test]
    fn initial_sequence_needs_length_and_signal() {
        assert!(mtv_initial_seq(&uni(&[1.0, 2.0, 3.0])).is_err());
        assert!(matches!(
            mtv_initial_seq(&uni(&[2.0; 10])),
            Err(Error::Degenerate(_))
        ));
    }
}
