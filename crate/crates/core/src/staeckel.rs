//! Stäckel transform (coupling-constant metamorphosis) for natural
//! Hamiltonians `H = p²/μ(q) + V(q)` and their second-order symmetries.
//!
//! Given a conformal factor `U(q) > 0`, the final Hamiltonian is
//! `H̃ = H/U` with `μ̃ = μ U` and `Ṽ = V/U`. A symmetry `S = S_0 + W` of `H`
//! whose kinetic part also gives a symmetry `S_U = S_0 + W_U` of the
//! intermediate Hamiltonian `H_U = p²/μ + U` is carried over to
//!
//! ```text
//!     S̃ = S_0 + W - (W_U/U) H + H/U = S_0 + W + (1 - W_U) H̃ .
//! ```
//!
//! The free Euclidean instance (`H = ½p² - α`, `U = 1 + λ q²`,
//! `2λα = ω²`) turns `H̃ + α` into the deformed oscillator and the
//! transported symmetries into its angular blocks and Fradkin tensor.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::integrals::{poisson_bracket, BlockOrder, PhaseFunction};
use crate::model::{dot, Parameters, PhaseGradient, PhaseState};

type Field = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type FieldGradient = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
type Matrix = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;
type MatrixDerivative = Arc<dyn Fn(&[f64], usize) -> DMatrix<f64> + Send + Sync>;

/// Scalar field on configuration space with its gradient.
#[derive(Clone)]
pub struct ScalarField {
    value: Field,
    gradient: FieldGradient,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ScalarField")
    }
}

impl ScalarField {
    pub fn new<F, G>(value: F, gradient: G) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
        G: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        Self {
            value: Arc::new(value),
            gradient: Arc::new(gradient),
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(move |_| c, |q| vec![0.0; q.len()])
    }

    /// `a + b |q|²`.
    pub fn radial_quadratic(a: f64, b: f64) -> Self {
        Self::new(
            move |q| a + b * dot(q, q),
            move |q| q.iter().map(|x| 2.0 * b * x).collect(),
        )
    }

    pub fn value(&self, q: &[f64]) -> f64 {
        (self.value)(q)
    }

    pub fn gradient(&self, q: &[f64]) -> Vec<f64> {
        (self.gradient)(q)
    }

    pub fn product(&self, other: &ScalarField) -> ScalarField {
        let (a, b) = (self.clone(), other.clone());
        let (ga, gb) = (self.clone(), other.clone());
        ScalarField::new(
            move |q| a.value(q) * b.value(q),
            move |q| {
                let (va, vb) = (ga.value(q), gb.value(q));
                ga.gradient(q)
                    .iter()
                    .zip(gb.gradient(q))
                    .map(|(da, db)| da * vb + va * db)
                    .collect()
            },
        )
    }

    pub fn quotient(&self, other: &ScalarField) -> ScalarField {
        let (a, b) = (self.clone(), other.clone());
        let (ga, gb) = (self.clone(), other.clone());
        ScalarField::new(
            move |q| a.value(q) / b.value(q),
            move |q| {
                let (va, vb) = (ga.value(q), gb.value(q));
                ga.gradient(q)
                    .iter()
                    .zip(gb.gradient(q))
                    .map(|(da, db)| (da * vb - va * db) / (vb * vb))
                    .collect()
            },
        )
    }
}

/// Symmetric matrix field `a^{ij}(q)` with its partial derivatives `∂a/∂q_k`.
#[derive(Clone)]
pub struct MatrixField {
    value: Matrix,
    derivative: MatrixDerivative,
}

impl fmt::Debug for MatrixField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("MatrixField")
    }
}

impl MatrixField {
    pub fn new<F, D>(value: F, derivative: D) -> Self
    where
        F: Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
        D: Fn(&[f64], usize) -> DMatrix<f64> + Send + Sync + 'static,
    {
        Self {
            value: Arc::new(value),
            derivative: Arc::new(derivative),
        }
    }

    pub fn constant(a: DMatrix<f64>) -> Self {
        let n = a.nrows();
        Self::new(move |_| a.clone(), move |_, _| DMatrix::zeros(n, n))
    }

    pub fn value(&self, q: &[f64]) -> DMatrix<f64> {
        (self.value)(q)
    }

    pub fn derivative(&self, q: &[f64], k: usize) -> DMatrix<f64> {
        (self.derivative)(q, k)
    }
}

fn quadratic_form(a: &DMatrix<f64>, p: &[f64]) -> f64 {
    let n = p.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += a[(i, j)] * p[i] * p[j];
        }
    }
    s
}

/// `H = p²/μ(q) + V(q)`.
#[derive(Debug, Clone)]
pub struct NaturalHamiltonian {
    pub mu: ScalarField,
    pub v: ScalarField,
    pub name: String,
}

impl NaturalHamiltonian {
    pub fn new(name: impl Into<String>, mu: ScalarField, v: ScalarField) -> Self {
        Self {
            mu,
            v,
            name: name.into(),
        }
    }

    fn mu_checked(&self, q: &[f64]) -> Result<f64> {
        let mu = self.mu.value(q);
        if mu > 0.0 && mu.is_finite() {
            Ok(mu)
        } else {
            Err(Error::Domain(format!("mass function mu = {mu} is not positive")))
        }
    }
}

impl PhaseFunction for NaturalHamiltonian {
    fn eval(&self, state: &PhaseState) -> Result<f64> {
        let mu = self.mu_checked(&state.q)?;
        Ok(state.p_squared() / mu + self.v.value(&state.q))
    }

    fn analytic_gradient(&self, state: &PhaseState) -> Option<Result<PhaseGradient>> {
        let mu = match self.mu_checked(&state.q) {
            Ok(mu) => mu,
            Err(e) => return Some(Err(e)),
        };
        let p2 = state.p_squared();
        let dmu = self.mu.gradient(&state.q);
        let dv = self.v.gradient(&state.q);
        Some(Ok(PhaseGradient {
            dq: dmu
                .iter()
                .zip(dv)
                .map(|(dm, dv)| -p2 / (mu * mu) * dm + dv)
                .collect(),
            dp: state.p.iter().map(|p| 2.0 * p / mu).collect(),
        }))
    }

    fn label(&self) -> String {
        self.name.clone()
    }
}

/// `S = Σ a^{ij}(q) p_i p_j + W(q)`, with the potential part `W_U` it takes
/// as a symmetry of the intermediate Hamiltonian.
#[derive(Debug, Clone)]
pub struct SecondOrderSymmetry {
    pub name: String,
    pub a: MatrixField,
    pub w: ScalarField,
    pub w_u: ScalarField,
}

impl SecondOrderSymmetry {
    /// `S_0 = Σ a^{ij} p_i p_j` with its phase-space gradient.
    pub fn kinetic(&self, state: &PhaseState) -> (f64, PhaseGradient) {
        let q = &state.q;
        let p = &state.p;
        let a = self.a.value(q);
        let value = quadratic_form(&a, p);
        let dq = (0..q.len())
            .map(|k| quadratic_form(&self.a.derivative(q, k), p))
            .collect();
        let ap = &a * nalgebra::DVector::from_column_slice(p);
        let dp = ap.iter().map(|v| 2.0 * v).collect();
        (value, PhaseGradient { dq, dp })
    }

    /// The symmetry `S_U = S_0 + W_U` of the intermediate Hamiltonian.
    pub fn intermediate(&self) -> SymmetryView<'_> {
        SymmetryView {
            symmetry: self,
            potential: &self.w_u,
        }
    }

    /// The symmetry `S = S_0 + W` of the initial Hamiltonian.
    pub fn initial(&self) -> SymmetryView<'_> {
        SymmetryView {
            symmetry: self,
            potential: &self.w,
        }
    }
}

/// `S_0` plus one of the two potential parts, as a phase function.
pub struct SymmetryView<'a> {
    symmetry: &'a SecondOrderSymmetry,
    potential: &'a ScalarField,
}

impl PhaseFunction for SymmetryView<'_> {
    fn eval(&self, state: &PhaseState) -> Result<f64> {
        Ok(self.symmetry.kinetic(state).0 + self.potential.value(&state.q))
    }

    fn analytic_gradient(&self, state: &PhaseState) -> Option<Result<PhaseGradient>> {
        let (_, mut g) = self.symmetry.kinetic(state);
        for (d, w) in g.dq.iter_mut().zip(self.potential.gradient(&state.q)) {
            *d += w;
        }
        Some(Ok(g))
    }

    fn label(&self) -> String {
        self.symmetry.name.clone()
    }
}

impl PhaseFunction for SecondOrderSymmetry {
    fn eval(&self, state: &PhaseState) -> Result<f64> {
        self.initial().eval(state)
    }

    fn analytic_gradient(&self, state: &PhaseState) -> Option<Result<PhaseGradient>> {
        self.initial().analytic_gradient(state)
    }

    fn label(&self) -> String {
        self.name.clone()
    }
}

fn check_u(u: &ScalarField, q: &[f64]) -> Result<f64> {
    let value = u.value(q);
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Domain(format!("conformal factor U = {value} is not positive")))
    }
}

/// Final Hamiltonian `H̃ = H/U`, i.e. `μ̃ = μ U` and `Ṽ = V/U`.
pub fn staeckel_transform(h: &NaturalHamiltonian, u: &ScalarField) -> NaturalHamiltonian {
    NaturalHamiltonian {
        mu: h.mu.product(u),
        v: h.v.quotient(u),
        name: format!("{}~", h.name),
    }
}

/// A symmetry carried to the final Hamiltonian.
#[derive(Debug, Clone)]
pub struct TransportedSymmetry {
    pub symmetry: SecondOrderSymmetry,
    pub h_tilde: NaturalHamiltonian,
    pub u: ScalarField,
}

pub fn transform_symmetry(
    s: &SecondOrderSymmetry,
    h_tilde: &NaturalHamiltonian,
    u: &ScalarField,
) -> TransportedSymmetry {
    TransportedSymmetry {
        symmetry: s.clone(),
        h_tilde: h_tilde.clone(),
        u: u.clone(),
    }
}

impl PhaseFunction for TransportedSymmetry {
    fn eval(&self, state: &PhaseState) -> Result<f64> {
        let q = &state.q;
        check_u(&self.u, q)?;
        let h = self.h_tilde.eval(state)?;
        let (s0, _) = self.symmetry.kinetic(state);
        Ok(s0 + self.symmetry.w.value(q) + (1.0 - self.symmetry.w_u.value(q)) * h)
    }

    fn analytic_gradient(&self, state: &PhaseState) -> Option<Result<PhaseGradient>> {
        let run = || -> Result<PhaseGradient> {
            let q = &state.q;
            check_u(&self.u, q)?;
            let h = self.h_tilde.eval(state)?;
            let dh = self
                .h_tilde
                .analytic_gradient(state)
                .expect("natural Hamiltonians carry analytic gradients")?;
            let (_, mut g) = self.symmetry.kinetic(state);
            let wu = self.symmetry.w_u.value(q);
            let dw = self.symmetry.w.gradient(q);
            let dwu = self.symmetry.w_u.gradient(q);
            for k in 0..q.len() {
                g.dq[k] += dw[k] - dwu[k] * h + (1.0 - wu) * dh.dq[k];
                g.dp[k] += (1.0 - wu) * dh.dp[k];
            }
            Ok(g)
        };
        Some(run())
    }

    fn label(&self) -> String {
        format!("{}~", self.symmetry.name)
    }
}

/// Which integral a transported free-motion symmetry corresponds to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymmetryRole {
    Block { m: usize, order: BlockOrder },
    /// Momentum product `p_i p_j` (0-based, `i ≤ j`).
    Momenta { i: usize, j: usize },
}

/// The free Euclidean motion mapped onto the deformed oscillator.
#[derive(Debug, Clone)]
pub struct PaperInstance {
    pub params: Parameters,
    /// `α = ω² / (2λ)`, with `H̃ = H_λ - α`.
    pub alpha: f64,
    pub u: ScalarField,
    pub initial: NaturalHamiltonian,
    pub intermediate: NaturalHamiltonian,
    pub final_h: NaturalHamiltonian,
    pub symmetries: Vec<(SymmetryRole, SecondOrderSymmetry)>,
}

impl PaperInstance {
    pub fn transported(&self) -> Vec<(SymmetryRole, TransportedSymmetry)> {
        self.symmetries
            .iter()
            .map(|(role, s)| (*role, transform_symmetry(s, &self.final_h, &self.u)))
            .collect()
    }
}

fn block_matrix(q: &[f64], range: std::ops::Range<usize>) -> DMatrix<f64> {
    let n = q.len();
    let mut a = DMatrix::zeros(n, n);
    for i in range.clone() {
        for j in range.clone() {
            if i == j {
                a[(i, i)] = range.clone().filter(|&k| k != i).map(|k| q[k] * q[k]).sum();
            } else {
                a[(i, j)] = -q[i] * q[j];
            }
        }
    }
    a
}

fn block_matrix_derivative(q: &[f64], range: std::ops::Range<usize>, k: usize) -> DMatrix<f64> {
    let n = q.len();
    let mut d = DMatrix::zeros(n, n);
    if !range.contains(&k) {
        return d;
    }
    for i in range.clone() {
        if i != k {
            d[(i, i)] = 2.0 * q[k];
            d[(i, k)] = -q[i];
            d[(k, i)] = -q[i];
        }
    }
    d
}

/// Angular-momentum block of free motion: `W = W_U = 0`.
pub fn block_symmetry(n: usize, m: usize, order: BlockOrder) -> SecondOrderSymmetry {
    let range = match order {
        BlockOrder::Ascending => 0..m,
        BlockOrder::Descending => n - m..n,
    };
    let (r1, r2) = (range.clone(), range);
    let name = match order {
        BlockOrder::Ascending => format!("S^({m})"),
        BlockOrder::Descending => format!("S_({m})"),
    };
    SecondOrderSymmetry {
        name,
        a: MatrixField::new(
            move |q| block_matrix(q, r1.clone()),
            move |q, k| block_matrix_derivative(q, r2.clone(), k),
        ),
        w: ScalarField::constant(0.0),
        w_u: ScalarField::constant(0.0),
    }
}

/// `S_ij = p_i p_j` with `W = 0` and `W_U = 2λ q_i q_j`.
pub fn momenta_symmetry(n: usize, i: usize, j: usize, lambda: f64) -> SecondOrderSymmetry {
    let mut a = DMatrix::zeros(n, n);
    a[(i, j)] += 0.5;
    a[(j, i)] += 0.5;
    SecondOrderSymmetry {
        name: format!("S_{}{}", i + 1, j + 1),
        a: MatrixField::constant(a),
        w: ScalarField::constant(0.0),
        w_u: ScalarField::new(
            move |q| 2.0 * lambda * q[i] * q[j],
            move |q| {
                let mut g = vec![0.0; q.len()];
                g[i] += 2.0 * lambda * q[j];
                g[j] += 2.0 * lambda * q[i];
                g
            },
        ),
    }
}

/// Initial `H = ½p² - α`, intermediate `H_U = ½p² + λ q² + 1`, final
/// `H̃ = (p² - 2α) / (2(1 + λ q²))`, with every second-order symmetry of
/// free motion used in the construction.
pub fn build_paper_instance(params: &Parameters) -> Result<PaperInstance> {
    if params.lambda == 0.0 {
        return Err(Error::FlatLimit);
    }
    let n = params.n_dim;
    let lambda = params.lambda;
    let alpha = params.omega * params.omega / (2.0 * lambda);
    let u = ScalarField::radial_quadratic(1.0, lambda);
    let mu = ScalarField::constant(2.0);
    let initial = NaturalHamiltonian::new("H", mu.clone(), ScalarField::constant(-alpha));
    let intermediate = NaturalHamiltonian::new("H_U", mu, u.clone());
    let final_h = staeckel_transform(&initial, &u);

    let mut symmetries = Vec::new();
    for order in [BlockOrder::Ascending, BlockOrder::Descending] {
        for m in 2..=n {
            symmetries.push((SymmetryRole::Block { m, order }, block_symmetry(n, m, order)));
        }
    }
    for i in 0..n {
        for j in i..n {
            symmetries.push((SymmetryRole::Momenta { i, j }, momenta_symmetry(n, i, j, lambda)));
        }
    }
    Ok(PaperInstance {
        params: *params,
        alpha,
        u,
        initial,
        intermediate,
        final_h,
        symmetries,
    })
}

/// Residuals of one transported symmetry at a phase point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransportResidual {
    /// `|{H̃, S̃}|`.
    pub bracket: f64,
    /// Difference between `S̃ - H̃` and the matching integral of the oscillator.
    pub identity: f64,
}

/// Checks one transported symmetry against the oscillator integrals.
///
/// `S̃^(m) - H̃ = C^(m)` for the blocks and `S̃_ij - H̃ = I_ij` for the momenta
/// products, after substituting `H̃ = H_λ - α`.
pub fn transport_residual(
    instance: &PaperInstance,
    role: SymmetryRole,
    transported: &TransportedSymmetry,
    state: &PhaseState,
) -> Result<TransportResidual> {
    use crate::integrals::{AngularBlock, FradkinComponent};

    let bracket = poisson_bracket(&instance.final_h, transported, state)?.abs();
    let s_tilde = transported.eval(state)?;
    let h_tilde = instance.final_h.eval(state)?;
    let target = match role {
        SymmetryRole::Block { m, order } => AngularBlock {
            n_dim: instance.params.n_dim,
            m,
            order,
        }
        .eval(state)?,
        SymmetryRole::Momenta { i, j } => FradkinComponent::new(instance.params, i, j).eval(state)?,
    };
    Ok(TransportResidual {
        bracket,
        identity: (s_tilde - h_tilde - target).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrals::{fd_gradient, gradient, GenericSampler};
    use crate::model::{evaluate_h, ManifoldKind};
    use approx::assert_relative_eq;

    fn random_states(params: Parameters, kind: ManifoldKind, count: usize) -> Vec<PhaseState> {
        GenericSampler::new(params, kind, 7).unwrap().samples(count)
    }

    #[test]
    fn identity_transform() {
        let h = NaturalHamiltonian::new(
            "H",
            ScalarField::radial_quadratic(2.0, 0.3),
            ScalarField::radial_quadratic(0.0, 1.5),
        );
        let h1 = staeckel_transform(&h, &ScalarField::constant(1.0));
        let s = PhaseState::new(vec![0.3, -0.8], vec![1.1, 0.2]).unwrap();
        assert_relative_eq!(h.eval(&s).unwrap(), h1.eval(&s).unwrap(), epsilon = 1e-15);
    }

    #[test]
    fn paper_instance_fields() {
        let params = Parameters::new(0.02, 1.0, 3).unwrap();
        let inst = build_paper_instance(&params).unwrap();
        assert_relative_eq!(inst.alpha, 25.0, epsilon = 1e-12);
        let q = [0.4, -1.2, 2.0];
        let q2 = dot(&q, &q);
        assert_relative_eq!(inst.final_h.mu.value(&q), 2.0 * (1.0 + 0.02 * q2), epsilon = 1e-14);
        assert_relative_eq!(inst.final_h.v.value(&q), -25.0 / (1.0 + 0.02 * q2), epsilon = 1e-14);
        assert_eq!(inst.intermediate.eval(&PhaseState::zeros(3)).unwrap(), 1.0);
        // 2(N-1) blocks plus N(N+1)/2 momentum products
        assert_eq!(inst.symmetries.len(), 4 + 6);
        assert_eq!(
            build_paper_instance(&Parameters::new(0.0, 1.0, 3).unwrap()).unwrap_err(),
            Error::FlatLimit
        );
    }

    #[test]
    fn final_hamiltonian_is_shifted_oscillator() {
        for (lambda, kind) in [(0.02, ManifoldKind::Hyperbolic), (-0.02, ManifoldKind::Interior)] {
            let params = Parameters::new(lambda, 1.0, 3).unwrap();
            let inst = build_paper_instance(&params).unwrap();
            for s in random_states(params, kind, 50) {
                let h_tilde = inst.final_h.eval(&s).unwrap();
                let direct = (s.p_squared() - 2.0 * inst.alpha) / (2.0 * (1.0 + lambda * s.q_squared()));
                assert_relative_eq!(h_tilde, direct, max_relative = 1e-13);
                assert_relative_eq!(
                    h_tilde + inst.alpha,
                    evaluate_h(&params, &s).unwrap(),
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn exterior_states_are_rejected() {
        let params = Parameters::new(-0.02, 1.0, 2).unwrap();
        let inst = build_paper_instance(&params).unwrap();
        let s = PhaseState::new(vec![10.0, 0.0], vec![0.0, 1.0]).unwrap();
        assert!(matches!(inst.final_h.eval(&s), Err(Error::Domain(_))));
        let (_, t) = &inst.transported()[0];
        assert!(matches!(t.eval(&s), Err(Error::Domain(_))));
    }

    #[test]
    fn free_motion_symmetries_are_symmetries() {
        let params = Parameters::new(0.05, 1.3, 3).unwrap();
        let inst = build_paper_instance(&params).unwrap();
        for s in random_states(params, ManifoldKind::Hyperbolic, 20) {
            for (_, sym) in &inst.symmetries {
                let b0 = poisson_bracket(&inst.initial, sym, &s).unwrap();
                let bu = poisson_bracket(&inst.intermediate, &sym.intermediate(), &s).unwrap();
                assert!(b0.abs() < 1e-10 && bu.abs() < 1e-10, "{}: {b0} {bu}", sym.name);
            }
        }
    }

    #[test]
    fn symmetry_gradients_match_finite_differences() {
        let params = Parameters::new(0.05, 1.3, 4).unwrap();
        let inst = build_paper_instance(&params).unwrap();
        for s in random_states(params, ManifoldKind::Hyperbolic, 5) {
            for (_, t) in inst.transported() {
                let a = gradient(&t, &s).unwrap().to_flat();
                let d = fd_gradient(&t, &s).unwrap().to_flat();
                let scale = a.iter().fold(1.0f64, |m, v| m.max(v.abs()));
                for (x, y) in a.iter().zip(&d) {
                    assert!((x - y).abs() < 1e-6 * scale, "{}: {x} vs {y}", t.label());
                }
            }
        }
    }

    #[test]
    fn transported_symmetries_match_oscillator_integrals() {
        for (lambda, kind) in [(0.02, ManifoldKind::Hyperbolic), (-0.02, ManifoldKind::Interior)] {
            let params = Parameters::new(lambda, 1.0, 3).unwrap();
            let inst = build_paper_instance(&params).unwrap();
            let transported = inst.transported();
            for s in random_states(params, kind, 30) {
                for (role, t) in &transported {
                    let r = transport_residual(&inst, *role, t, &s).unwrap();
                    assert!(r.bracket <= 1e-9, "{}: {}", t.label(), r.bracket);
                    assert!(r.identity <= 1e-12, "{}: {}", t.label(), r.identity);
                }
            }
        }
    }

    /// The engine with a non-zero `W`: harmonic oscillator `½p² + ½k q²`
    /// with `S = p_1² + k q_1²`, `U = 1 + λ q²`, intermediate `½p² + U` and
    /// `S_U = p_1² + 2λ q_1²`. The result must commute with `H̃`.
    #[test]
    fn engine_handles_nonzero_initial_potential() {
        let (k, lambda) = (1.7, 0.04);
        let n = 2;
        let h = NaturalHamiltonian::new(
            "H",
            ScalarField::constant(2.0),
            ScalarField::radial_quadratic(0.0, 0.5 * k),
        );
        let u = ScalarField::radial_quadratic(1.0, lambda);
        let h_u = NaturalHamiltonian::new("H_U", ScalarField::constant(2.0), u.clone());
        let mut a = DMatrix::zeros(n, n);
        a[(0, 0)] = 1.0;
        let s = SecondOrderSymmetry {
            name: "S".into(),
            a: MatrixField::constant(a),
            w: ScalarField::new(move |q| k * q[0] * q[0], move |q| vec![2.0 * k * q[0], 0.0]),
            w_u: ScalarField::new(
                move |q| 2.0 * lambda * q[0] * q[0],
                move |q| vec![4.0 * lambda * q[0], 0.0],
            ),
        };
        let h_tilde = staeckel_transform(&h, &u);
        let s_tilde = transform_symmetry(&s, &h_tilde, &u);
        let params = Parameters::new(lambda, k.sqrt(), n).unwrap();
        for st in random_states(params, ManifoldKind::Hyperbolic, 30) {
            assert!(poisson_bracket(&h, &s, &st).unwrap().abs() < 1e-10);
            assert!(poisson_bracket(&h_u, &s.intermediate(), &st).unwrap().abs() < 1e-10);
            let b = poisson_bracket(&h_tilde, &s_tilde, &st).unwrap();
            assert!(b.abs() < 1e-10, "{b}");
        }
    }
}
