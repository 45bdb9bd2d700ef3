//! Chains and their empirical auto/cross-covariance sequences.
//!
//! Lags are stored for `k ≥ 0` only. Negative lags follow the even extension
//! `r(-k) = r(k)` (univariate) or `R(-k) = R(k)ᵀ` (matrix), and every lag at or
//! beyond the chain length is zero. All sequences are centered at the global
//! chain mean and normalized by `1/M`.

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// Chains longer than this use the FFT path for full-length sequences.
pub const FFT_THRESHOLD: usize = 256;

/// An `M × d` matrix of iterates `g(X_t)`, stored by column.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    len: usize,
    columns: Vec<Vec<f64>>,
}

impl Chain {
    pub fn from_columns(columns: Vec<Vec<f64>>) -> Result<Self> {
        let dim = columns.len();
        if dim == 0 {
            return Err(Error::invalid("chain needs at least one component"));
        }
        let len = columns[0].len();
        if columns.iter().any(|c| c.len() != len) {
            return Err(Error::invalid("chain columns have different lengths"));
        }
        if len < 2 {
            return Err(Error::invalid(format!("chain length {len} is below 2")));
        }
        if columns.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("chain"));
        }
        Ok(Chain { len, columns })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::invalid("chain rows have different lengths"));
        }
        Self::from_columns(
            (0..dim)
                .map(|j| rows.iter().map(|r| r[j]).collect())
                .collect(),
        )
    }

    pub fn univariate(values: Vec<f64>) -> Result<Self> {
        Self::from_columns(vec![values])
    }

    /// Number of iterates `M`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Number of components `d`.
    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, i: usize) -> &[f64] {
        &self.columns[i]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn row(&self, t: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[t]).collect()
    }

    pub fn mean(&self) -> Vec<f64> {
        self.columns.iter().map(|c| mean(c)).collect()
    }

    /// The first `m` iterates.
    pub fn head(&self, m: usize) -> Result<Chain> {
        if m > self.len {
            return Err(Error::invalid(format!(
                "requested {m} rows from a chain of length {}",
                self.len
            )));
        }
        Chain::from_columns(self.columns.iter().map(|c| c[..m].to_vec()).collect())
    }

    /// `Y · T` for a `d × p` matrix `T`.
    pub fn transform(&self, t: &DMatrix<f64>) -> Result<Chain> {
        if t.nrows() != self.dim() {
            return Err(Error::invalid(format!(
                "transform has {} rows, chain has {} components",
                t.nrows(),
                self.dim()
            )));
        }
        let cols = (0..t.ncols())
            .map(|j| {
                let mut out = vec![0.0; self.len];
                for (i, col) in self.columns.iter().enumerate() {
                    let coef = t[(i, j)];
                    for (o, v) in out.iter_mut().zip(col) {
                        *o += coef * v;
                    }
                }
                out
            })
            .collect();
        Chain::from_columns(cols)
    }
}

/// Empirical autocovariances `r(0..=max_lag)` of a univariate chain.
#[derive(Debug, Clone, PartialEq)]
pub struct LagSequence {
    values: Vec<f64>,
}

impl LagSequence {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("lag sequence needs lag 0"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("lag sequence"));
        }
        Ok(LagSequence { values })
    }

    /// Value at any integer lag, with the even extension and zero support
    /// beyond the stored lags.
    pub fn get(&self, k: i64) -> f64 {
        self.values
            .get(k.unsigned_abs() as usize)
            .copied()
            .unwrap_or(0.0)
    }

    /// Stored values for `k = 0, 1, …`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max_lag(&self) -> usize {
        self.values.len() - 1
    }

    pub fn scaled(&self, c: f64) -> LagSequence {
        LagSequence {
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    /// `Σ_{k∈ℤ} r(k)²`.
    pub fn squared_norm(&self) -> f64 {
        let tail: f64 = self.values[1..].iter().map(|v| v * v).sum();
        self.values[0] * self.values[0] + 2.0 * tail
    }
}

/// Cross-covariance matrices `R(0..=max_lag)`, `R(k)[i][j] = Cov(g_i(X_t), g_j(X_{t+k}))`.
#[derive(Debug, Clone, PartialEq)]
pub struct LagMatrixSequence {
    dim: usize,
    lags: usize,
    data: Vec<f64>,
}

impl LagMatrixSequence {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_lag(&self) -> usize {
        self.lags - 1
    }

    /// Entry `R(k)[i][j]` for `k ≥ 0`; zero beyond the stored lags.
    pub fn entry(&self, k: usize, i: usize, j: usize) -> f64 {
        if k >= self.lags {
            return 0.0;
        }
        self.data[(k * self.dim + i) * self.dim + j]
    }

    /// `R(k)` at any integer lag (`R(-k) = R(k)ᵀ`).
    pub fn at(&self, k: i64) -> DMatrix<f64> {
        let d = self.dim;
        let lag = k.unsigned_abs() as usize;
        if k >= 0 {
            DMatrix::from_fn(d, d, |i, j| self.entry(lag, i, j))
        } else {
            DMatrix::from_fn(d, d, |i, j| self.entry(lag, j, i))
        }
    }

    /// Univariate sequence of component `i`.
    pub fn diagonal_sequence(&self, i: usize) -> LagSequence {
        LagSequence {
            values: (0..self.lags).map(|k| self.entry(k, i, i)).collect(),
        }
    }
}

pub(crate) fn mean(y: &[f64]) -> f64 {
    y.iter().sum::<f64>() / y.len() as f64
}

/// `y - mean(y)`.
pub fn centered(y: &[f64]) -> Vec<f64> {
    let m = mean(y);
    y.iter().map(|v| v - m).collect()
}

/// `Σ_{t=0}^{M-1-k} x_t y_{t+k}` in a fixed summation order.
pub(crate) fn lag_product_sum(x: &[f64], y: &[f64], k: usize) -> f64 {
    let n = x.len();
    if k >= n {
        return 0.0;
    }
    x[..n - k].iter().zip(&y[k..]).map(|(a, b)| a * b).sum()
}

fn check_univariate(y: &[f64]) -> Result<()> {
    if y.len() < 2 {
        return Err(Error::invalid(format!(
            "chain length {} is below 2",
            y.len()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("chain"));
    }
    Ok(())
}

/// Full empirical autocovariance sequence `r(0..M)` of a univariate chain.
///
/// Short chains use direct summation; longer ones go through the FFT, which
/// agrees with the direct path to round-off relative to `r(0)`.
pub fn empirical_autocov(y: &[f64]) -> Result<LagSequence> {
    check_univariate(y)?;
    if y.len() > FFT_THRESHOLD {
        empirical_autocov_fft(y)
    } else {
        empirical_autocov_lags(y, y.len() - 1)
    }
}

/// Direct `O(M · K)` evaluation of `r(0..=max_lag)`.
pub fn empirical_autocov_lags(y: &[f64], max_lag: usize) -> Result<LagSequence> {
    check_univariate(y)?;
    let m = y.len();
    let yc = centered(y);
    let values = (0..=max_lag.min(m - 1))
        .map(|k| lag_product_sum(&yc, &yc, k) / m as f64)
        .collect();
    LagSequence::new(values)
}

fn padded_transform(planner: &mut FftPlanner<f64>, x: &[f64], n: usize) -> Vec<Complex<f64>> {
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    buf.resize(n, Complex::new(0.0, 0.0));
    planner.plan_fft_forward(n).process(&mut buf);
    buf
}

/// `IFFT(conj(X) · Y)` unnormalized; index `k` holds `Σ x_t y_{t+k}` and index
/// `n - k` holds `Σ y_t x_{t+k}`.
fn correlate(planner: &mut FftPlanner<f64>, fx: &[Complex<f64>], fy: &[Complex<f64>]) -> Vec<f64> {
    let n = fx.len();
    let mut buf: Vec<Complex<f64>> = fx.iter().zip(fy).map(|(a, b)| a.conj() * b).collect();
    planner.plan_fft_inverse(n).process(&mut buf);
    buf.into_iter().map(|c| c.re / n as f64).collect()
}

fn fft_len(m: usize) -> usize {
    (2 * m).next_power_of_two()
}

/// FFT evaluation of the full sequence `r(0..M)`.
pub fn empirical_autocov_fft(y: &[f64]) -> Result<LagSequence> {
    check_univariate(y)?;
    let m = y.len();
    let yc = centered(y);
    let mut planner = FftPlanner::new();
    let f = padded_transform(&mut planner, &yc, fft_len(m));
    let corr = correlate(&mut planner, &f, &f);
    LagSequence::new(corr[..m].iter().map(|v| v / m as f64).collect())
}

/// Full matrix sequence `R(0..M)`; FFT for long chains, direct otherwise.
pub fn empirical_autocov_matrix(chain: &Chain) -> LagMatrixSequence {
    if chain.len() > FFT_THRESHOLD {
        autocov_matrix_fft(chain)
    } else {
        empirical_autocov_matrix_lags(chain, chain.len() - 1)
    }
}

/// Direct evaluation of `R(0..=max_lag)`.
pub fn empirical_autocov_matrix_lags(chain: &Chain, max_lag: usize) -> LagMatrixSequence {
    let m = chain.len();
    let d = chain.dim();
    let lags = max_lag.min(m - 1) + 1;
    let cols: Vec<Vec<f64>> = chain.columns().iter().map(|c| centered(c)).collect();
    let mut data = vec![0.0; lags * d * d];
    for k in 0..lags {
        for i in 0..d {
            for j in 0..d {
                data[(k * d + i) * d + j] = lag_product_sum(&cols[i], &cols[j], k) / m as f64;
            }
        }
    }
    LagMatrixSequence { dim: d, lags, data }
}

/// Matrix sequence up to `max_lag`, choosing direct or FFT evaluation by cost.
pub fn autocov_matrix_up_to(chain: &Chain, max_lag: usize) -> LagMatrixSequence {
    let m = chain.len();
    let fft_cost = 8.0 * (fft_len(m) as f64) * (fft_len(m) as f64).log2();
    if ((max_lag + 1) as f64) * (m as f64) <= fft_cost || m <= FFT_THRESHOLD {
        empirical_autocov_matrix_lags(chain, max_lag)
    } else {
        let full = autocov_matrix_fft(chain);
        let d = full.dim;
        let lags = max_lag.min(m - 1) + 1;
        LagMatrixSequence {
            dim: d,
            lags,
            data: full.data[..lags * d * d].to_vec(),
        }
    }
}

fn autocov_matrix_fft(chain: &Chain) -> LagMatrixSequence {
    let m = chain.len();
    let d = chain.dim();
    let n = fft_len(m);
    let mut planner = FftPlanner::new();
    let transforms: Vec<Vec<Complex<f64>>> = chain
        .columns()
        .iter()
        .map(|c| padded_transform(&mut planner, &centered(c), n))
        .collect();
    let mut data = vec![0.0; m * d * d];
    for i in 0..d {
        for j in i..d {
            let corr = correlate(&mut planner, &transforms[i], &transforms[j]);
            for k in 0..m {
                let forward = corr[k] / m as f64;
                data[(k * d + i) * d + j] = forward;
                if i != j {
                    let backward = if k == 0 {
                        forward
                    } else {
                        corr[n - k] / m as f64
                    };
                    data[(k * d + j) * d + i] = backward;
                }
            }
        }
    }
    LagMatrixSequence {
        dim: d,
        lags: m,
        data,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

/// The series `a · Y[:, i] ± b · Y[:, j]` (0-based component indices).
pub fn combine_components(
    chain: &Chain,
    i: usize,
    j: usize,
    a: f64,
    b: f64,
    sign: Sign,
) -> Result<Vec<f64>> {
    let d = chain.dim();
    if i >= d || j >= d {
        return Err(Error::invalid(format!(
            "component index out of range for d = {d}"
        )));
    }
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::NonFinite("combination weights"));
    }
    let b = match sign {
        Sign::Plus => b,
        Sign::Minus => -b,
    };
    Ok(chain
        .column(i)
        .iter()
        .zip(chain.column(j))
        .map(|(x, y)| a * x + b * y)
        .collect())
}
