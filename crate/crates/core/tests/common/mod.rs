//! Independent reference implementations shared by the integration tests and
//! the acceptance runner.
#![allow(dead_code, clippy::neg_cmp_op_on_partial_ord)]

use momentvar::numerics::RngStream;
use momentvar::Chain;
use nalgebra::{DMatrix, DVector};

/// Scalar initial positive sequence estimator, written directly from its
/// textbook definition with plain loops.
pub fn initial_sequence_scalar(y: &[f64]) -> Option<f64> {
    let m = y.len();
    let mut total = 0.0;
    for v in y {
        total += v;
    }
    let mean = total / m as f64;
    let yc: Vec<f64> = y.iter().map(|v| v - mean).collect();
    let gamma = |k: usize| {
        let mut s = 0.0;
        for t in 0..m - k {
            s += yc[t] * yc[t + k];
        }
        s / m as f64
    };
    let pair = |l: usize| gamma(2 * l) + gamma(2 * l + 1);
    let last = (m - 2) / 2;
    let mut l = 0;
    let mut sigma = -gamma(0) + pair(0) * 2.0;
    while !(sigma > 0.0) {
        l += 1;
        if l > last {
            return None;
        }
        sigma += pair(l) * 2.0;
    }
    while l < last {
        let next = sigma + pair(l + 1) * 2.0;
        if next <= sigma {
            break;
        }
        sigma = next;
        l += 1;
    }
    Some(sigma)
}

/// Minimizes `wᵀBw - 2aᵀw` over `w ≥ 0` by trying every support set.
pub fn nnls_brute_force(a: &[f64], b: &DMatrix<f64>) -> Vec<f64> {
    let n = a.len();
    let objective = |w: &[f64]| {
        let wv = DVector::from_column_slice(w);
        (wv.transpose() * b * &wv)[(0, 0)] - 2.0 * a.iter().zip(w).map(|(x, y)| x * y).sum::<f64>()
    };
    let mut best = vec![0.0; n];
    let mut best_obj = 0.0;
    for mask in 1u32..(1 << n) {
        let idx: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let sub = DMatrix::from_fn(idx.len(), idx.len(), |r, c| b[(idx[r], idx[c])]);
        let rhs = DVector::from_iterator(idx.len(), idx.iter().map(|&i| a[i]));
        let Some(sol) = sub.lu().solve(&rhs) else {
            continue;
        };
        if sol.iter().any(|v| *v < 0.0) {
            continue;
        }
        let mut w = vec![0.0; n];
        for (k, &i) in idx.iter().enumerate() {
            w[i] = sol[k];
        }
        let obj = objective(&w);
        if obj < best_obj {
            best_obj = obj;
            best = w;
        }
    }
    best
}

/// Random symmetric positive definite matrix `XᵀX + εI`.
pub fn random_spd(n: usize, rng: &mut RngStream) -> DMatrix<f64> {
    let x = DMatrix::from_fn(n + 2, n, |_, _| rng.draw_normal());
    x.transpose() * x + DMatrix::identity(n, n) * 1e-3
}

pub fn random_symmetric(n: usize, rng: &mut RngStream) -> DMatrix<f64> {
    let x = DMatrix::from_fn(n, n, |_, _| rng.draw_normal());
    (&x + x.transpose()) * 0.5
}

/// AR(1) components driven by a shared shock, so components are correlated.
pub fn correlated_ar(m: usize, coeffs: &[f64], seed: u64) -> Chain {
    let d = coeffs.len();
    let mut rng = RngStream::new(seed, 0);
    let mut cols = vec![Vec::with_capacity(m); d];
    let mut x = vec![0.0; d];
    for _ in 0..m {
        let common = rng.draw_normal();
        for i in 0..d {
            x[i] = coeffs[i] * x[i] + 0.6 * rng.draw_normal() + 0.8 * common;
            cols[i].push(x[i]);
        }
    }
    Chain::from_columns(cols).unwrap()
}

/// `Σ_l w_l α_l^|k|` for `k = 0..=max_lag`.
pub fn moment_sequence(atoms: &[(f64, f64)], max_lag: usize) -> Vec<f64> {
    (0..=max_lag)
        .map(|k| atoms.iter().map(|(a, w)| w * a.powi(k as i32)).sum())
        .collect()
}

/// `Σ_l w_l (1 + α_l)/(1 - α_l)`.
pub fn moment_avar(atoms: &[(f64, f64)]) -> f64 {
    atoms.iter().map(|(a, w)| w * (1.0 + a) / (1.0 - a)).sum()
}
