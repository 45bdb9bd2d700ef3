//! Cyclic Jacobi eigensolver for small dense symmetric matrices, plus the
//! spectral-function helpers (inverse, square roots) built on it.

use super::{asymmetry, ensure_finite_matrix, symmetrize};
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Default stopping threshold: off-diagonal Frobenius norm relative to `‖A‖_F`.
pub const DEFAULT_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 100;

#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    /// Eigenvalues, descending.
    pub values: DVector<f64>,
    /// Orthonormal eigenvectors stored as columns, in the order of `values`.
    pub vectors: DMatrix<f64>,
}

impl EigenDecomposition {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        self.apply(|l| l)
    }

    /// `U · diag(f(λ)) · Uᵀ`, exactly symmetric.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let mut scaled = self.vectors.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= f(self.values[j]);
        }
        symmetrize(&(scaled * self.vectors.transpose()))
    }

    pub fn min_value(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn max_value(&self) -> f64 {
        self.values[0]
    }
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Sweeps run in fixed row-major pivot order until the off-diagonal
/// Frobenius norm drops below `tol · ‖A‖_F`; the result is deterministic.
/// Each eigenvector is sign-normalized so its largest-magnitude entry is
/// positive.
pub fn sym_eigen(a: &DMatrix<f64>, tol: f64) -> Result<EigenDecomposition> {
    let n = a.nrows();
    if n == 0 || a.ncols() != n {
        return Err(Error::invalid(format!(
            "eigendecomposition needs a nonempty square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    ensure_finite_matrix(a, "eigen input")?;
    let norm = a.norm();
    let asym = asymmetry(a);
    if asym > 1e-10 * norm {
        return Err(Error::NotSymmetric {
            asymmetry: asym,
            tolerance: 1e-10 * norm,
        });
    }

    let mut m = symmetrize(a);
    let mut v = DMatrix::<f64>::identity(n, n);
    let threshold = tol * norm;

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        if off_diagonal_norm(&m) <= threshold {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(&mut m, &mut v, p, q);
            }
        }
    }
    if !converged && off_diagonal_norm(&m) > threshold {
        return Err(Error::NoConvergence {
            solver: "jacobi",
            iterations: MAX_SWEEPS,
            residual: off_diagonal_norm(&m),
            best: m.diagonal().iter().copied().collect(),
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].total_cmp(&m[(i, i)]).then(i.cmp(&j)));
    let values = DVector::from_iterator(n, order.iter().map(|&i| m[(i, i)]));
    let mut vectors = DMatrix::<f64>::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = v.column(src).into_owned();
        let lead = col.iter().copied().fold(
            0.0f64,
            |best, x| if x.abs() > best.abs() { x } else { best },
        );
        if lead < 0.0 {
            col.neg_mut();
        }
        vectors.set_column(dst, &col);
    }
    Ok(EigenDecomposition { values, vectors })
}

fn off_diagonal_norm(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += m[(i, j)] * m[(i, j)];
            }
        }
    }
    s.sqrt()
}

// One Jacobi rotation zeroing m[p][q] (Rutishauser's stable form).
fn rotate(m: &mut DMatrix<f64>, v: &mut DMatrix<f64>, p: usize, q: usize) {
    let apq = m[(p, q)];
    if apq == 0.0 {
        return;
    }
    let app = m[(p, p)];
    let aqq = m[(q, q)];
    let theta = (aqq - app) / (2.0 * apq);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    let tau = s / (1.0 + c);

    let n = m.nrows();
    m[(p, p)] = app - t * apq;
    m[(q, q)] = aqq + t * apq;
    m[(p, q)] = 0.0;
    m[(q, p)] = 0.0;
    for r in 0..n {
        if r != p && r != q {
            let arp = m[(r, p)];
            let arq = m[(r, q)];
            let new_rp = arp - s * (arq + tau * arp);
            let new_rq = arq + s * (arp - tau * arq);
            m[(r, p)] = new_rp;
            m[(p, r)] = new_rp;
            m[(r, q)] = new_rq;
            m[(q, r)] = new_rq;
        }
    }
    for r in 0..n {
        let vrp = v[(r, p)];
        let vrq = v[(r, q)];
        v[(r, p)] = vrp - s * (vrq + tau * vrp);
        v[(r, q)] = vrq + s * (vrp - tau * vrq);
    }
}

/// Symmetric inverse square root of an SPD matrix.
pub fn inverse_sqrt_spd(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = sym_eigen(a, DEFAULT_TOL)?;
    if eig.min_value() <= 0.0 {
        return Err(Error::NotPositiveDefinite(format!(
            "smallest eigenvalue {:e}",
            eig.min_value()
        )));
    }
    Ok(eig.apply(|l| 1.0 / l.sqrt()))
}

/// Symmetric square root of a PSD matrix; tiny negative eigenvalues from
/// round-off are clipped to zero.
pub fn sqrt_psd(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = sym_eigen(a, DEFAULT_TOL)?;
    let scale = eig.max_value().abs().max(1.0);
    if eig.min_value() < -1e-10 * scale {
        return Err(Error::NotPositiveDefinite(format!(
            "smallest eigenvalue {:e}",
            eig.min_value()
        )));
    }
    Ok(eig.apply(|l| l.max(0.0).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngStream;
    use approx::assert_relative_eq;

    fn random_symmetric(d: usize, rng: &mut RngStream) -> DMatrix<f64> {
        let g = DMatrix::from_fn(d, d, |_, _| rng.draw_normal());
        symmetrize(&(&g + g.transpose()))
    }

    #[test]
    fn diagonal_input() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 5.0]);
        let e = sym_eigen(&a, DEFAULT_TOL).unwrap();
        assert_eq!(e.values.as_slice(), &[5.0, 2.0]);
        assert_relative_eq!(e.vectors[(1, 0)].abs(), 1.0);
        assert_relative_eq!(e.vectors[(0, 1)].abs(), 1.0);
    }

    #[test]
    fn two_by_two_by_hand() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let e = sym_eigen(&a, DEFAULT_TOL).unwrap();
        assert_relative_eq!(e.values[0], 3.0, epsilon = 1e-14);
        assert_relative_eq!(e.values[1], 1.0, epsilon = 1e-14);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_relative_eq!(e.vectors[(0, 0)].abs(), h, epsilon = 1e-14);
        assert_relative_eq!(e.vectors[(0, 0)], e.vectors[(1, 0)], epsilon = 1e-14);
        assert_relative_eq!(e.vectors[(0, 1)], -e.vectors[(1, 1)], epsilon = 1e-14);
    }

    #[test]
    fn identity() {
        let e = sym_eigen(&DMatrix::identity(3, 3), DEFAULT_TOL).unwrap();
        assert_eq!(e.values.as_slice(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn reconstruction_and_orthonormality() {
        let mut rng = RngStream::new(11, 0);
        for d in 1..=20 {
            let a = random_symmetric(d, &mut rng);
            let e = sym_eigen(&a, DEFAULT_TOL).unwrap();
            let err = (e.reconstruct() - &a).norm();
            assert!(err < 1e-10 * a.norm(), "d={d} err={err}");
            let gram = &e.vectors * e.vectors.transpose();
            assert!((gram - DMatrix::identity(d, d)).amax() < 1e-10);
            for w in e.values.as_slice().windows(2) {
                assert!(w[0] >= w[1]);
            }
        }
    }

    #[test]
    fn rejects_asymmetric_and_nonfinite() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(matches!(
            sym_eigen(&a, DEFAULT_TOL),
            Err(Error::NotSymmetric { .. })
        ));
        let b = DMatrix::from_row_slice(2, 2, &[1.0, f64::NAN, f64::NAN, 1.0]);
        assert!(matches!(
            sym_eigen(&b, DEFAULT_TOL),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn zero_matrix() {
        let e = sym_eigen(&DMatrix::zeros(3, 3), DEFAULT_TOL).unwrap();
        assert!(e.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn spectral_helpers() {
        let a = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let w = inverse_sqrt_spd(&a).unwrap();
        let id = &w * &a * &w;
        assert!((id - DMatrix::identity(2, 2)).amax() < 1e-12);
        let r = sqrt_psd(&a).unwrap();
        assert!((&r * &r - &a).amax() < 1e-12);
        assert!(inverse_sqrt_spd(&DMatrix::from_row_slice(1, 1, &[-1.0])).is_err());
    }
}
