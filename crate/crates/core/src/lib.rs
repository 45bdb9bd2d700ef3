//! Asymptotic variance estimation for multivariate Markov chain output.
//!
//! The centerpiece is the moment least-squares (momentLS) estimator: each
//! empirical autocovariance sequence is projected onto the cone of moment
//! sequences supported on `[-1 + delta, 1 - delta]`, and the asymptotic
//! variance is read off the fitted discrete measure in closed form.
//! Cross-covariances are handled by polarization, and a spectral refinement
//! guarantees a positive semidefinite matrix.
//!
//! Module map:
//!
//! * [`numerics`]: NNLS on quadratic forms, Jacobi eigensolver, chi-squared
//!   quantiles, seeded random streams.
//! * [`autocov`]: chains and empirical auto/cross-covariance sequences.
//! * [`momentls`]: support grids, delta tuning, projection, closed-form avar.
//! * [`multivar`]: the multivariate estimator and evaluation metrics.
//! * [`baselines`]: spectral variance, batch means, OBM, multivariate
//!   initial sequence.
//! * [`simulate`]: discrete Metropolis-Hastings and VAR(1) test beds with
//!   exact ground truth.
//! * [`harness`]: replicated benchmark runs and CSV output.
//! * [`io`]: chain CSV reading and writing.
//!
//! With the default `parallel` feature, independent work (pairwise fits,
//! benchmark replicates) runs on rayon; without it every code path is
//! sequential and produces bit-identical results.

// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autocov;
pub mod baselines;
pub mod error;
pub mod harness;
pub mod io;
pub mod momentls;
pub mod multivar;
pub mod numerics;
pub mod par;
pub mod simulate;

pub use autocov::{Chain, LagMatrixSequence, LagSequence};
pub use error::{Error, Result};
pub use momentls::{MomentMeasure, SupportGrid};
pub use multivar::{AvarMatrix, DeltaVector, Method};
