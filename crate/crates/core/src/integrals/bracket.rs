//! Phase-space functions and the canonical Poisson bracket.

use std::sync::Arc;

use crate::error::Result;
use crate::model::{PhaseGradient, PhaseState};

/// A scalar function on phase space.
///
/// Implementors that know their gradient in closed form return it from
/// [`PhaseFunction::analytic_gradient`]; everything else falls back to
/// central differences.
pub trait PhaseFunction: Send + Sync {
    fn eval(&self, state: &PhaseState) -> Result<f64>;

    fn analytic_gradient(&self, _state: &PhaseState) -> Option<Result<PhaseGradient>> {
        None
    }

    fn label(&self) -> String {
        "f".to_string()
    }
}

impl<T: PhaseFunction + ?Sized> PhaseFunction for &T {
    fn eval(&self, state: &PhaseState) -> Result<f64> {
        (**self).eval(state)
    }

    fn analytic_gradient(&self, state: &PhaseState) -> Option<Result<PhaseGradient>> {
        (**self).analytic_gradient(state)
    }

    fn label(&self) -> String {
        (**self).label()
    }
}

impl<T: PhaseFunction + ?Sized> PhaseFunction for Box<T> {
    fn eval(&self, state: &PhaseState) -> Result<f64> {
        (**self).eval(state)
    }

    fn analytic_gradient(&self, state: &PhaseState) -> Option<Result<PhaseGradient>> {
        (**self).analytic_gradient(state)
    }

    fn label(&self) -> String {
        (**self).label()
    }
}

impl<T: PhaseFunction + ?Sized> PhaseFunction for Arc<T> {
    fn eval(&self, state: &PhaseState) -> Result<f64> {
        (**self).eval(state)
    }

    fn analytic_gradient(&self, state: &PhaseState) -> Option<Result<PhaseGradient>> {
        (**self).analytic_gradient(state)
    }

    fn label(&self) -> String {
        (**self).label()
    }
}

/// Value-only phase function built from a closure.
pub struct FnPhase<F> {
    name: String,
    f: F,
}

impl<F> FnPhase<F>
where
    F: Fn(&PhaseState) -> Result<f64> + Send + Sync,
{
    pub fn new(name: impl Into<String>, f: F) -> Self {
        Self {
            name: name.into(),
            f,
        }
    }
}

impl<F> PhaseFunction for FnPhase<F>
where
    F: Fn(&PhaseState) -> Result<f64> + Send + Sync,
{
    fn eval(&self, state: &PhaseState) -> Result<f64> {
        (self.f)(state)
    }

    fn label(&self) -> String {
        self.name.clone()
    }
}

/// Canonical coordinate `q_i` or momentum `p_i` (0-based index).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coordinate {
    Q(usize),
    P(usize),
}

impl PhaseFunction for Coordinate {
    fn eval(&self, state: &PhaseState) -> Result<f64> {
        Ok(match *self {
            Coordinate::Q(i) => state.q[i],
            Coordinate::P(i) => state.p[i],
        })
    }

    fn analytic_gradient(&self, state: &PhaseState) -> Option<Result<PhaseGradient>> {
        let mut g = PhaseGradient::zeros(state.dim());
        match *self {
            Coordinate::Q(i) => g.dq[i] = 1.0,
            Coordinate::P(i) => g.dp[i] = 1.0,
        }
        Some(Ok(g))
    }

    fn label(&self) -> String {
        match *self {
            Coordinate::Q(i) => format!("q{}", i + 1),
            Coordinate::P(i) => format!("p{}", i + 1),
        }
    }
}

/// Central-difference gradient with per-coordinate step `max(1, |x|) ε^(1/3)`.
pub fn fd_gradient<F: PhaseFunction + ?Sized>(f: &F, state: &PhaseState) -> Result<PhaseGradient> {
    let n = state.dim();
    let base = state.to_flat();
    let mut out = vec![0.0; 2 * n];
    let eps = f64::EPSILON.cbrt();
    let mut probe = base.clone();
    for k in 0..2 * n {
        let h = base[k].abs().max(1.0) * eps;
        probe[k] = base[k] + h;
        let hi = f.eval(&PhaseState::from_flat(&probe))?;
        probe[k] = base[k] - h;
        let lo = f.eval(&PhaseState::from_flat(&probe))?;
        probe[k] = base[k];
        out[k] = (hi - lo) / (2.0 * h);
    }
    Ok(PhaseGradient {
        dq: out[..n].to_vec(),
        dp: out[n..].to_vec(),
    })
}

/// Analytic gradient when the function provides one, otherwise central differences.
pub fn gradient<F: PhaseFunction + ?Sized>(f: &F, state: &PhaseState) -> Result<PhaseGradient> {
    match f.analytic_gradient(state) {
        Some(g) => g,
        None => fd_gradient(f, state),
    }
}

fn bracket_from(df: &PhaseGradient, dg: &PhaseGradient) -> f64 {
    df.dq
        .iter()
        .zip(&dg.dp)
        .zip(df.dp.iter().zip(&dg.dq))
        .map(|((fq, gp), (fp, gq))| fq * gp - fp * gq)
        .sum()
}

/// `{f, g} = Σ_i (∂f/∂q_i ∂g/∂p_i - ∂f/∂p_i ∂g/∂q_i)`.
pub fn poisson_bracket<F, G>(f: &F, g: &G, state: &PhaseState) -> Result<f64>
where
    F: PhaseFunction + ?Sized,
    G: PhaseFunction + ?Sized,
{
    Ok(bracket_from(&gradient(f, state)?, &gradient(g, state)?))
}

/// Bracket computed from finite differences only, ignoring analytic gradients.
pub fn poisson_bracket_fd<F, G>(f: &F, g: &G, state: &PhaseState) -> Result<f64>
where
    F: PhaseFunction + ?Sized,
    G: PhaseFunction + ?Sized,
{
    Ok(bracket_from(&fd_gradient(f, state)?, &fd_gradient(g, state)?))
}

/// Largest `|{f_a, f_b}|` over all pairs `a < b` of a set.
pub fn max_pairwise_bracket(set: &[Box<dyn PhaseFunction>], state: &PhaseState) -> Result<f64> {
    let grads = set
        .iter()
        .map(|f| gradient(f.as_ref(), state))
        .collect::<Result<Vec<_>>>()?;
    let mut worst = 0.0f64;
    for a in 0..grads.len() {
        for b in a + 1..grads.len() {
            worst = worst.max(bracket_from(&grads[a], &grads[b]).abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_pairs() {
        let s = PhaseState::new(vec![0.3, -1.2, 2.0], vec![0.1, 0.5, -0.4]).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let b = poisson_bracket(&Coordinate::Q(i), &Coordinate::P(j), &s).unwrap();
                assert_eq!(b, if i == j { 1.0 } else { 0.0 });
                let qq = poisson_bracket(&Coordinate::Q(i), &Coordinate::Q(j), &s).unwrap();
                assert_eq!(qq, 0.0);
            }
        }
        let fd = poisson_bracket_fd(&Coordinate::Q(0), &Coordinate::P(0), &s).unwrap();
        assert!((fd - 1.0).abs() < 1e-10);
    }

    #[test]
    fn closure_functions_use_finite_differences() {
        let s = PhaseState::new(vec![1.0, 2.0], vec![3.0, -1.0]).unwrap();
        let f = FnPhase::new("q1p2", |s: &PhaseState| Ok(s.q[0] * s.p[1]));
        let g = FnPhase::new("q2p1", |s: &PhaseState| Ok(s.q[1] * s.p[0]));
        let b = poisson_bracket(&f, &g, &s).unwrap();
        let exact = s.q[1] * s.p[1] - s.q[0] * s.p[0];
        assert!((b - exact).abs() < 1e-8, "{b} vs {exact}");
    }
}
