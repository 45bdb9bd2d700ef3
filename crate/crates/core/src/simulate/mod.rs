//! Test beds with exact ground truth: a randomly generated reversible
//! Metropolis–Hastings chain on a finite state space and a reversible VAR(1)
//! process.

pub mod mh;
pub mod var1;

pub use mh::{build_mh_model, mh_ground_truth, simulate_mh, DiscreteMHModel, MhParams};
pub use var1::{build_var1, simulate_var1, var1_ground_truth, Var1Model, Var1Preset};

use crate::autocov::Chain;
use crate::error::Result;
use crate::momentls::signed_l2_distance;
use crate::numerics::{matrix_rows, RngStream};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// One eigen-component of a reversible kernel: `γ_ij(k) = Σ_l c_il c_jl λ_l^|k|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthAtom {
    pub eigenvalue: f64,
    /// `c_il = ⟨g_i, φ_l⟩_π` for each component `i`.
    pub coefficients: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub sigma: DMatrix<f64>,
    pub mu: Vec<f64>,
    pub atoms: Option<Vec<TruthAtom>>,
}

impl GroundTruth {
    /// Exact `γ_ij(k)` when atoms are available.
    pub fn cross_cov(&self, i: usize, j: usize, k: i64) -> Option<f64> {
        let p = k.unsigned_abs() as i32;
        self.atoms.as_ref().map(|atoms| {
            atoms
                .iter()
                .map(|a| a.coefficients[i] * a.coefficients[j] * a.eigenvalue.powi(p))
                .sum()
        })
    }

    /// `γ_ij` as signed `(support, weight)` atoms.
    pub fn signed_atoms(&self, i: usize, j: usize) -> Option<Vec<(f64, f64)>> {
        self.atoms.as_ref().map(|atoms| {
            atoms
                .iter()
                .map(|a| (a.eigenvalue, a.coefficients[i] * a.coefficients[j]))
                .collect()
        })
    }

    /// `ℓ₂(ℤ)` distance from an estimated sequence given as signed atoms.
    pub fn l2_distance(&self, i: usize, j: usize, estimate: &[(f64, f64)]) -> Option<f64> {
        self.signed_atoms(i, j)
            .map(|truth| signed_l2_distance(estimate, &truth))
    }
}

/// A simulator with a known truth, as used by the benchmark harness.
#[derive(Debug, Clone)]
pub enum Model {
    Mh(DiscreteMHModel),
    Var1(Var1Model),
}

impl Model {
    pub fn dim(&self) -> usize {
        match self {
            Model::Mh(m) => m.dim(),
            Model::Var1(m) => m.dim(),
        }
    }

    pub fn ground_truth(&self) -> Result<GroundTruth> {
        match self {
            Model::Mh(m) => mh_ground_truth(m),
            Model::Var1(m) => Ok(GroundTruth {
                sigma: var1_ground_truth(m)?,
                mu: vec![0.0; m.dim()],
                atoms: None,
            }),
        }
    }

    pub fn simulate(&self, len: usize, rng: &mut RngStream) -> Result<Chain> {
        match self {
            Model::Mh(m) => simulate_mh(m, len, rng),
            Model::Var1(m) => simulate_var1(m, len, rng),
        }
    }

    /// JSON description of the model and its truth.
    pub fn to_json(&self) -> Result<serde_json::Value> {
        let truth = self.ground_truth()?;
        let truth_json = serde_json::json!({
            "sigma": matrix_rows(&truth.sigma),
            "mu": truth.mu,
        });
        Ok(match self {
            Model::Mh(m) => serde_json::json!({
                "kind": "mh",
                "states": m.states(),
                "dim": m.dim(),
                "rho": m.params.rho,
                "seed": m.params.seed,
                "pi": m.pi,
                "q": matrix_rows(&m.q),
                "g": matrix_rows(&m.g),
                "truth": truth_json,
            }),
            Model::Var1(m) => serde_json::json!({
                "kind": "var1",
                "a": matrix_rows(&m.a),
                "sigma_eps": matrix_rows(&m.sigma_eps),
                "v": matrix_rows(&m.v),
                "truth": truth_json,
            }),
        })
    }
}
