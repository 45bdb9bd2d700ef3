//! Self-contained numerical kernels shared by the estimators and simulators.

pub mod chi2;
pub mod eigen;
pub mod nnls;
pub mod rng;

pub use chi2::{chi2_cdf, chi2_quantile};
pub use eigen::{sym_eigen, EigenDecomposition};
pub use nnls::{nnls_qp, nnls_qp_gram, Gram, NnlsOptions, NnlsSolution, WeightVector};
pub use rng::RngStream;

use crate::error::{Error, Result};
use nalgebra::DMatrix;

/// Largest absolute difference between `a` and its transpose.
pub fn asymmetry(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

pub(crate) fn ensure_finite_matrix(a: &DMatrix<f64>, what: &'static str) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// `(A + Aᵀ) / 2`; exactly symmetric because floating-point addition commutes.
pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    DMatrix::from_fn(n, n, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]))
}

/// Row-major nested vectors, as used in JSON output.
pub fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}
