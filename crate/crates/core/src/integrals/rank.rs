//! Functional independence via the numerical rank of the Jacobian.

use nalgebra::DMatrix;

use super::bracket::{gradient, PhaseFunction};
use crate::error::{Error, Result};
use crate::model::PhaseState;

/// Singular values below `RANK_TOLERANCE · σ_max` count as zero.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct RankReport {
    pub rank: usize,
    /// Singular values in descending order.
    pub singular_values: Vec<f64>,
}

/// Jacobian with one row per function and `2N` columns `(q, p)`.
pub fn jacobian<F: PhaseFunction>(functions: &[F], state: &PhaseState) -> Result<DMatrix<f64>> {
    let n = state.dim();
    let mut jac = DMatrix::zeros(functions.len(), 2 * n);
    for (row, f) in functions.iter().enumerate() {
        let g = gradient(f, state)?.to_flat();
        for (col, v) in g.into_iter().enumerate() {
            jac[(row, col)] = v;
        }
    }
    Ok(jac)
}

/// Numerical rank of the Jacobian of `functions` at `state`.
///
/// Fails with [`Error::DegenerateState`] when every gradient vanishes, which
/// happens at non-generic points such as `q = p = 0`.
pub fn independence_rank<F: PhaseFunction>(functions: &[F], state: &PhaseState) -> Result<RankReport> {
    let jac = jacobian(functions, state)?;
    let mut singular_values: Vec<f64> = jac.svd(false, false).singular_values.iter().copied().collect();
    singular_values.sort_by(|a, b| b.total_cmp(a));
    let sigma_max = singular_values.first().copied().unwrap_or(0.0);
    if !(sigma_max > 0.0) {
        return Err(Error::DegenerateState { rank: 0 });
    }
    let threshold = sigma_max * RANK_TOLERANCE;
    let rank = singular_values.iter().filter(|s| **s > threshold).count();
    Ok(RankReport {
        rank,
        singular_values,
    })
}
