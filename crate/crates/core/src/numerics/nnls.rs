//! Nonnegative quadratic programming by a Lawson–Hanson active set.
//!
//! Solves `min_w  -2 aᵀw + wᵀBw  subject to w ≥ 0` for a symmetric positive
//! semidefinite `B`. The constant `rᵀr` of the least-squares form does not
//! affect the minimizer and is left to the caller.
//!
//! `B` is accessed through the [`Gram`] trait so that structured matrices can
//! supply columns on demand: only columns of the passive (free) set are ever
//! materialized, which keeps each iteration at `O(s · |P|)`.

use super::{asymmetry, ensure_finite_matrix};
use crate::error::{Error, Result};
use nalgebra::DMatrix;

/// Relative Schur-complement pivot below which a candidate column is treated
/// as linearly dependent on the current passive set.
const PIVOT_FLOOR: f64 = 1e-11;

pub trait Gram: Sync {
    fn dim(&self) -> usize;
    fn entry(&self, i: usize, j: usize) -> f64;

    fn column(&self, j: usize) -> Vec<f64> {
        (0..self.dim()).map(|i| self.entry(i, j)).collect()
    }
}

impl Gram for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn entry(&self, i: usize, j: usize) -> f64 {
        self[(i, j)]
    }

    fn column(&self, j: usize) -> Vec<f64> {
        self.column(j).iter().copied().collect()
    }
}

/// Nonnegative weights returned by the solver.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Indices with strictly positive weight, ascending.
    pub fn support(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, w)| **w > 0.0)
            .map(|(i, _)| i)
            .collect()
    }
}

impl std::ops::Index<usize> for WeightVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NnlsOptions {
    /// KKT tolerance on the gradient `2(Bw - a)`; defaults to
    /// `1e-10 · (1 + ‖a‖∞)`.
    pub tol: Option<f64>,
    /// Cap on passive-set additions; defaults to `10 · s`.
    pub max_iter: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct NnlsSolution {
    pub weights: WeightVector,
    /// Gradient `2(Bw - a)` at the solution.
    pub gradient: Vec<f64>,
    pub iterations: usize,
    pub tol: f64,
}

impl NnlsSolution {
    /// Largest violation of `g ≥ -tol` and `|w·g| ≤ tol`.
    pub fn kkt_violation(&self) -> f64 {
        kkt_violation(self.weights.as_slice(), &self.gradient)
    }
}

fn kkt_violation(w: &[f64], g: &[f64]) -> f64 {
    w.iter()
        .zip(g)
        .map(|(w, g)| (-g).max((w * g).abs()).max(0.0))
        .fold(0.0, f64::max)
}

/// Objective `-2 aᵀw + wᵀBw` (the least-squares loss minus `rᵀr`).
pub fn objective<G: Gram + ?Sized>(a: &[f64], b: &G, w: &[f64]) -> f64 {
    let support: Vec<usize> = (0..w.len()).filter(|&i| w[i] != 0.0).collect();
    let mut quad = 0.0;
    for &i in &support {
        for &j in &support {
            quad += w[i] * b.entry(i, j) * w[j];
        }
    }
    quad - 2.0 * support.iter().map(|&i| a[i] * w[i]).sum::<f64>()
}

/// Dense entry point: validates `B` and solves with the given KKT tolerance.
pub fn nnls_qp(a: &[f64], b: &DMatrix<f64>, tol: f64) -> Result<WeightVector> {
    if b.nrows() != a.len() || b.ncols() != a.len() {
        return Err(Error::invalid(format!(
            "B is {}x{} but a has length {}",
            b.nrows(),
            b.ncols(),
            a.len()
        )));
    }
    ensure_finite_matrix(b, "B")?;
    let asym = asymmetry(b);
    if asym > 1e-12 {
        return Err(Error::NotSymmetric {
            asymmetry: asym,
            tolerance: 1e-12,
        });
    }
    let opts = NnlsOptions {
        tol: Some(tol),
        max_iter: None,
    };
    nnls_qp_gram(a, b, opts).map(|s| s.weights)
}

/// Active-set solver over any [`Gram`] matrix.
pub fn nnls_qp_gram<G: Gram + ?Sized>(a: &[f64], b: &G, opts: NnlsOptions) -> Result<NnlsSolution> {
    let s = a.len();
    if b.dim() != s {
        return Err(Error::invalid(format!(
            "B has dimension {} but a has length {s}",
            b.dim()
        )));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("a"));
    }
    let a_inf = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = opts.tol.unwrap_or(1e-10 * (1.0 + a_inf));
    if !(tol > 0.0) {
        return Err(Error::invalid("NNLS tolerance must be positive"));
    }
    let max_iter = opts.max_iter.unwrap_or(10 * s.max(1));

    let mut solver = ActiveSet::new(a, b, tol);
    let iterations = solver.run(max_iter)?;
    let gradient = solver.full_gradient();
    Ok(NnlsSolution {
        weights: WeightVector(solver.w),
        gradient,
        iterations,
        tol,
    })
}

struct ActiveSet<'a, G: Gram + ?Sized> {
    a: &'a [f64],
    b: &'a G,
    tol: f64,
    w: Vec<f64>,
    passive: Vec<usize>,
    columns: Vec<Option<Vec<f64>>>,
}

impl<'a, G: Gram + ?Sized> ActiveSet<'a, G> {
    fn new(a: &'a [f64], b: &'a G, tol: f64) -> Self {
        ActiveSet {
            a,
            b,
            tol,
            w: vec![0.0; a.len()],
            passive: Vec::new(),
            columns: vec![None; a.len()],
        }
    }

    fn column(&mut self, j: usize) -> &[f64] {
        if self.columns[j].is_none() {
            self.columns[j] = Some(self.b.column(j));
        }
        self.columns[j].as_deref().unwrap()
    }

    /// Half gradient `Bw - a`.
    fn half_gradient(&mut self) -> Vec<f64> {
        let mut h: Vec<f64> = self.a.iter().map(|v| -v).collect();
        for k in 0..self.passive.len() {
            self.column(self.passive[k]);
        }
        for &p in &self.passive {
            let wp = self.w[p];
            if wp == 0.0 {
                continue;
            }
            let col = self.columns[p].as_deref().unwrap();
            for (hi, c) in h.iter_mut().zip(col) {
                *hi += c * wp;
            }
        }
        h
    }

    fn full_gradient(&mut self) -> Vec<f64> {
        self.half_gradient().into_iter().map(|v| 2.0 * v).collect()
    }

    fn run(&mut self, max_iter: usize) -> Result<usize> {
        let s = self.a.len();
        let mut excluded = vec![false; s];
        let mut iterations = 0;
        loop {
            let h = self.half_gradient();
            let mut best: Option<usize> = None;
            for i in 0..s {
                if excluded[i] || self.passive.contains(&i) {
                    continue;
                }
                if 2.0 * h[i] < -self.tol && best.is_none_or(|b| h[i] < h[b]) {
                    best = Some(i);
                }
            }
            let Some(j) = best else {
                return Ok(iterations);
            };
            if iterations >= max_iter {
                let g: Vec<f64> = h.iter().map(|v| 2.0 * v).collect();
                return Err(Error::NoConvergence {
                    solver: "nnls",
                    iterations,
                    residual: kkt_violation(&self.w, &g),
                    best: self.w.clone(),
                });
            }
            iterations += 1;

            self.passive.push(j);
            let mut first_pass = true;
            loop {
                let z = match self.solve_passive() {
                    Some(z) => z,
                    None if first_pass => {
                        self.passive.pop();
                        excluded[j] = true;
                        break;
                    }
                    // later systems are principal submatrices of one that
                    // factored, so this only happens through round-off
                    None => break,
                };
                if first_pass {
                    let zj = z[self.passive.len() - 1];
                    if zj <= 0.0 {
                        self.passive.pop();
                        excluded[j] = true;
                        break;
                    }
                }
                if z.iter().all(|&v| v > 0.0) {
                    for (k, &p) in self.passive.iter().enumerate() {
                        self.w[p] = z[k];
                    }
                    if first_pass {
                        excluded.iter_mut().for_each(|e| *e = false);
                    }
                    break;
                }
                // step from w toward z until the first passive weight hits zero
                let mut step = f64::INFINITY;
                for (k, &p) in self.passive.iter().enumerate() {
                    if z[k] <= 0.0 {
                        let wp = self.w[p];
                        step = step.min(wp / (wp - z[k]));
                    }
                }
                let mut keep = Vec::with_capacity(self.passive.len());
                for (k, &p) in self.passive.iter().enumerate() {
                    let wp = self.w[p];
                    let next = wp + step * (z[k] - wp);
                    let hits_zero = z[k] <= 0.0 && wp / (wp - z[k]) <= step;
                    if hits_zero || next <= 0.0 {
                        self.w[p] = 0.0;
                    } else {
                        self.w[p] = next;
                        keep.push(p);
                    }
                }
                self.passive = keep;
                if first_pass {
                    excluded.iter_mut().for_each(|e| *e = false);
                }
                first_pass = false;
                if self.passive.is_empty() {
                    break;
                }
            }
        }
    }

    /// Solves `B_PP z = a_P` by Cholesky; `None` when a pivot collapses.
    fn solve_passive(&mut self) -> Option<Vec<f64>> {
        let n = self.passive.len();
        let idx = self.passive.clone();
        let mut m = vec![0.0; n * n];
        for (c, &pc) in idx.iter().enumerate() {
            let col = self.column(pc);
            for (r, &pr) in idx.iter().enumerate() {
                m[r * n + c] = col[pr];
            }
        }
        // in-place lower Cholesky
        for j in 0..n {
            let diag = m[j * n + j];
            let mut d = diag;
            for k in 0..j {
                d -= m[j * n + k] * m[j * n + k];
            }
            if !(d > PIVOT_FLOOR * diag.abs()) {
                return None;
            }
            let ljj = d.sqrt();
            m[j * n + j] = ljj;
            for i in (j + 1)..n {
                let mut v = m[i * n + j];
                for k in 0..j {
                    v -= m[i * n + k] * m[j * n + k];
                }
                m[i * n + j] = v / ljj;
            }
        }
        let mut y: Vec<f64> = idx.iter().map(|&p| self.a[p]).collect();
        for i in 0..n {
            for k in 0..i {
                y[i] -= m[i * n + k] * y[k];
            }
            y[i] /= m[i * n + i];
        }
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                y[i] -= m[k * n + i] * y[k];
            }
            y[i] /= m[i * n + i];
        }
        Some(y)
    }
}
