//! Randomly generated Metropolis–Hastings chain on `{0, …, s-1}`.
//!
//! The target `π` and proposal rows are normalized Uniform(0, 1] draws; `g`
//! assigns each state an i.i.d. `N(0, Σ_g)` vector with
//! `Σ_g[i][j] = (i+1)(j+1) ρ^|i-j|`, so component `j` has variance `(j+1)²`.

use super::{GroundTruth, TruthAtom};
use crate::autocov::Chain;
use crate::error::{Error, Result};
use crate::numerics::eigen::{sqrt_psd, sym_eigen, DEFAULT_TOL};
use crate::numerics::rng::cumulative;
use crate::numerics::{symmetrize, RngStream};
use nalgebra::{DMatrix, DVector};

const PI_STREAM: u64 = 0x5049;
const PROPOSAL_STREAM: u64 = 0x5052;
const G_STREAM: u64 = 0x4746;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MhParams {
    pub seed: u64,
    pub states: usize,
    pub dim: usize,
    pub rho: f64,
}

impl Default for MhParams {
    fn default() -> Self {
        MhParams {
            seed: 0,
            states: 100,
            dim: 4,
            rho: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMHModel {
    pub params: MhParams,
    pub pi: Vec<f64>,
    /// Row-stochastic transition matrix.
    pub q: DMatrix<f64>,
    /// `g` values, one row per state.
    pub g: DMatrix<f64>,
    cdf: Vec<Vec<f64>>,
}

impl DiscreteMHModel {
    /// Model from explicit parts; checks stochasticity and detailed balance.
    pub fn from_parts(pi: Vec<f64>, q: DMatrix<f64>, g: DMatrix<f64>) -> Result<Self> {
        let s = pi.len();
        if s < 2 || q.nrows() != s || q.ncols() != s || g.nrows() != s || g.ncols() == 0 {
            return Err(Error::invalid("inconsistent discrete model shapes"));
        }
        let params = MhParams {
            seed: 0,
            states: s,
            dim: g.ncols(),
            rho: 0.0,
        };
        let model = Self::assemble(params, pi, q, g)?;
        model.validate()?;
        Ok(model)
    }

    fn assemble(params: MhParams, pi: Vec<f64>, q: DMatrix<f64>, g: DMatrix<f64>) -> Result<Self> {
        let cdf = (0..q.nrows())
            .map(|i| {
                let row: Vec<f64> = q.row(i).iter().copied().collect();
                cumulative(&row)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DiscreteMHModel {
            params,
            pi,
            q,
            g,
            cdf,
        })
    }

    pub fn states(&self) -> usize {
        self.pi.len()
    }

    pub fn dim(&self) -> usize {
        self.g.ncols()
    }

    /// Row sums equal 1 and `π_i Q_ij = π_j Q_ji`, both within 1e-12.
    pub fn validate(&self) -> Result<()> {
        let s = self.states();
        if self.pi.iter().any(|p| !(*p > 0.0)) || (self.pi.iter().sum::<f64>() - 1.0).abs() > 1e-12
        {
            return Err(Error::invalid(
                "target distribution is not a positive probability vector",
            ));
        }
        for i in 0..s {
            let row: f64 = self.q.row(i).sum();
            if (row - 1.0).abs() > 1e-12 || self.q.row(i).iter().any(|v| *v < 0.0) {
                return Err(Error::invalid(format!(
                    "row {i} of Q is not a probability vector"
                )));
            }
            for j in 0..i {
                let gap = (self.pi[i] * self.q[(i, j)] - self.pi[j] * self.q[(j, i)]).abs();
                if gap > 1e-12 {
                    return Err(Error::invalid(format!(
                        "detailed balance fails for states {i}, {j} ({gap:e})"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn normalized(v: Vec<f64>) -> Vec<f64> {
    let total: f64 = v.iter().sum();
    v.into_iter().map(|x| x / total).collect()
}

pub fn build_mh_model(params: MhParams) -> Result<DiscreteMHModel> {
    let MhParams {
        seed,
        states: s,
        dim: d,
        rho,
    } = params;
    if s < 2 || d < 1 {
        return Err(Error::invalid("need at least 2 states and 1 component"));
    }
    if !(rho.abs() < 1.0) {
        return Err(Error::invalid(format!(
            "|rho| = {} must be below 1",
            rho.abs()
        )));
    }

    let mut rng = RngStream::new(seed, PI_STREAM);
    let pi = normalized((0..s).map(|_| rng.draw_uniform_positive()).collect());

    let mut rng = RngStream::new(seed, PROPOSAL_STREAM);
    let proposal: Vec<Vec<f64>> = (0..s)
        .map(|_| normalized((0..s).map(|_| rng.draw_uniform_positive()).collect()))
        .collect();

    // π_i Q_ij = min(π_i P_ij, π_j P_ji) for i ≠ j
    let mut q = DMatrix::zeros(s, s);
    for i in 0..s {
        let mut off = 0.0;
        for j in 0..s {
            if i != j {
                let flow = (pi[i] * proposal[i][j]).min(pi[j] * proposal[j][i]);
                q[(i, j)] = flow / pi[i];
                off += q[(i, j)];
            }
        }
        q[(i, i)] = 1.0 - off;
    }

    let cov_g = DMatrix::from_fn(d, d, |i, j| {
        ((i + 1) * (j + 1)) as f64 * rho.powi((i as i32 - j as i32).abs())
    });
    let root = sqrt_psd(&cov_g)?;
    let mut rng = RngStream::new(seed, G_STREAM);
    let mut g = DMatrix::zeros(s, d);
    for state in 0..s {
        let z = DVector::from_iterator(d, (0..d).map(|_| rng.draw_normal()));
        let row = &root * z;
        for j in 0..d {
            g[(state, j)] = row[j];
        }
    }

    let model = DiscreteMHModel::assemble(params, pi, q, g)?;
    model.validate()?;
    Ok(model)
}

/// Exact truth from the spectral decomposition of `Q`.
///
/// `S = D_π^{1/2} Q D_π^{-1/2}` is symmetric; its eigenvectors `v_l` give the
/// `π`-orthonormal eigenfunctions `φ_l = D_π^{-1/2} v_l`. With
/// `c_il = ⟨g_i, φ_l⟩_π`, `Σ_ij = Σ_{l≥2} c_il c_jl (1 + λ_l)/(1 - λ_l)`.
pub fn mh_ground_truth(model: &DiscreteMHModel) -> Result<GroundTruth> {
    let s = model.states();
    let d = model.dim();
    let sqrt_pi: Vec<f64> = model.pi.iter().map(|p| p.sqrt()).collect();
    let sym = symmetrize(&DMatrix::from_fn(s, s, |i, j| {
        sqrt_pi[i] * model.q[(i, j)] / sqrt_pi[j]
    }));
    let eig = sym_eigen(&sym, DEFAULT_TOL)?;
    if (eig.values[0] - 1.0).abs() > 1e-8 {
        return Err(Error::Degenerate(format!(
            "leading eigenvalue {} is not 1",
            eig.values[0]
        )));
    }
    if eig.values[1] >= 1.0 - 1e-10 {
        return Err(Error::Degenerate(
            "eigenvalue 1 is not simple; the chain is not ergodic".into(),
        ));
    }

    let atoms: Vec<TruthAtom> = (1..s)
        .map(|l| {
            let v = eig.vectors.column(l);
            let coefficients = (0..d)
                .map(|i| {
                    (0..s)
                        .map(|k| model.g[(k, i)] * (v[k] / sqrt_pi[k]) * model.pi[k])
                        .sum()
                })
                .collect();
            TruthAtom {
                eigenvalue: eig.values[l],
                coefficients,
            }
        })
        .collect();

    let mut sigma = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            let v: f64 = atoms
                .iter()
                .map(|a| {
                    a.coefficients[i] * a.coefficients[j] * (1.0 + a.eigenvalue)
                        / (1.0 - a.eigenvalue)
                })
                .sum();
            sigma[(i, j)] = v;
            sigma[(j, i)] = v;
        }
    }
    let mu = (0..d)
        .map(|i| (0..s).map(|k| model.pi[k] * model.g[(k, i)]).sum())
        .collect();
    Ok(GroundTruth {
        sigma,
        mu,
        atoms: Some(atoms),
    })
}

/// Stationary chain of `g(X_t)`.
pub fn simulate_mh(model: &DiscreteMHModel, len: usize, rng: &mut RngStream) -> Result<Chain> {
    let states = simulate_mh_states(model, len, rng)?;
    let cols = (0..model.dim())
        .map(|j| states.iter().map(|&x| model.g[(x, j)]).collect())
        .collect();
    Chain::from_columns(cols)
}

/// Raw state path with `X_0 ~ π`.
pub fn simulate_mh_states(
    model: &DiscreteMHModel,
    len: usize,
    rng: &mut RngStream,
) -> Result<Vec<usize>> {
    if len < 2 {
        return Err(Error::invalid(format!("chain length {len} is below 2")));
    }
    let start = cumulative(&model.pi)?;
    let mut x = rng.draw_from_table(&start);
    let mut path = Vec::with_capacity(len);
    path.push(x);
    for _ in 1..len {
        x = rng.draw_from_table(&model.cdf[x]);
        path.push(x);
    }
    Ok(path)
}
