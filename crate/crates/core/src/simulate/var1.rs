//! Reversible VAR(1): `X_t = A X_{t-1} + ε_t`, `ε_t ~ N(0, Σ_ε)`.

use crate::autocov::Chain;
use crate::error::{Error, Result};
use crate::numerics::eigen::{sqrt_psd, sym_eigen, DEFAULT_TOL};
use crate::numerics::{asymmetry, symmetrize, RngStream};
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, PartialEq)]
pub struct Var1Model {
    pub a: DMatrix<f64>,
    pub sigma_eps: DMatrix<f64>,
    /// Stationary covariance `(I - A²)⁻¹ Σ_ε`.
    pub v: DMatrix<f64>,
}

impl Var1Model {
    pub fn dim(&self) -> usize {
        self.a.nrows()
    }
}

/// The two four-dimensional configurations with `A = D_ρ + 0.01 (J - I)`, `Σ_ε = I`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var1Preset {
    /// `D_ρ = diag(0.9, 0.9, -0.9, -0.9)`.
    Mixed,
    /// `D_ρ = diag(0.9, 0.9, 0.9, 0.9)`.
    Positive,
}

impl Var1Preset {
    pub fn from_id(id: &str) -> Option<Self> {
        match id {
            "1" | "mixed" => Some(Var1Preset::Mixed),
            "2" | "positive" => Some(Var1Preset::Positive),
            _ => None,
        }
    }

    pub fn diagonal(self) -> Vec<f64> {
        match self {
            Var1Preset::Mixed => vec![0.9, 0.9, -0.9, -0.9],
            Var1Preset::Positive => vec![0.9; 4],
        }
    }

    pub fn build(self) -> Result<Var1Model> {
        build_var1(&self.diagonal(), 0.01, &DMatrix::identity(4, 4))
    }
}

/// `A = diag(D_ρ) + off · (1 1ᵀ - I)`; validates stability and reversibility.
pub fn build_var1(diagonal: &[f64], off: f64, sigma_eps: &DMatrix<f64>) -> Result<Var1Model> {
    let d = diagonal.len();
    if d == 0 {
        return Err(Error::invalid("VAR(1) needs at least one component"));
    }
    if sigma_eps.nrows() != d || sigma_eps.ncols() != d {
        return Err(Error::invalid("innovation covariance has the wrong shape"));
    }
    if diagonal.iter().any(|v| !v.is_finite()) || !off.is_finite() {
        return Err(Error::NonFinite("VAR(1) coefficients"));
    }
    let a = DMatrix::from_fn(d, d, |i, j| if i == j { diagonal[i] } else { off });
    let eps_eig = sym_eigen(sigma_eps, DEFAULT_TOL)?;
    if eps_eig.min_value() <= 0.0 {
        return Err(Error::NotPositiveDefinite("innovation covariance".into()));
    }
    let a_eig = sym_eigen(&a, DEFAULT_TOL)?;
    let radius = a_eig.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if radius >= 1.0 {
        return Err(Error::invalid(format!(
            "spectral radius {radius} of A is not below 1"
        )));
    }
    let a_eps = &a * sigma_eps;
    if asymmetry(&a_eps) > 1e-12 * a_eps.norm().max(1.0) {
        return Err(Error::invalid(
            "A·Σ_ε is not symmetric; the process would not be reversible",
        ));
    }
    let inv = a_eig.apply(|l| 1.0 / (1.0 - l * l));
    let v = symmetrize(&(inv * sigma_eps));
    Ok(Var1Model {
        a,
        sigma_eps: sigma_eps.clone(),
        v,
    })
}

/// `Σ = 2 (I - A)⁻¹ V - V`.
pub fn var1_ground_truth(model: &Var1Model) -> Result<DMatrix<f64>> {
    let eig = sym_eigen(&model.a, DEFAULT_TOL)?;
    let inv = eig.apply(|l| 1.0 / (1.0 - l));
    Ok(symmetrize(&(inv * &model.v * 2.0 - &model.v)))
}

/// Stationary start `X_0 ~ N(0, V)` followed by the recursion.
pub fn simulate_var1(model: &Var1Model, len: usize, rng: &mut RngStream) -> Result<Chain> {
    if len < 2 {
        return Err(Error::invalid(format!("chain length {len} is below 2")));
    }
    let d = model.dim();
    let v_half = sqrt_psd(&model.v)?;
    let eps_half = sqrt_psd(&model.sigma_eps)?;
    let draw = |rng: &mut RngStream| DVector::from_iterator(d, (0..d).map(|_| rng.draw_normal()));

    let mut cols = vec![Vec::with_capacity(len); d];
    let mut x = &v_half * draw(rng);
    for t in 0..len {
        if t > 0 {
            x = &model.a * &x + &eps_half * draw(rng);
        }
        for (c, v) in cols.iter_mut().zip(x.iter()) {
            c.push(*v);
        }
    }
    Chain::from_columns(cols)
}
