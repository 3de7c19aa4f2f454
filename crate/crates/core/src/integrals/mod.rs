//! Constants of motion of the deformed oscillator.
//!
//! Three families: the ascending and descending angular-momentum blocks
//! `C^(m)`, `C_(m)` (`m = 2..N`), and the curved Fradkin tensor
//!
//! ```text
//!     I_ij = p_i p_j - (2 λ H_λ - ω²) q_i q_j,      H_λ = ½ Σ_i I_ii
//! ```
//!
//! where `H_λ` is the unreversed formula. On the exterior manifold the
//! Hamiltonian is `h = -H_λ`, and the tensor is reported with the same sign
//! flip so that its half-trace is still the Hamiltonian in use.

pub mod bracket;
pub mod rank;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::{
    classify_manifold, evaluate_h_on, gradient_h_on, ManifoldKind, Parameters, PhaseGradient,
    PhaseState,
};

pub use bracket::{
    fd_gradient, gradient, max_pairwise_bracket, poisson_bracket, poisson_bracket_fd, Coordinate,
    FnPhase, PhaseFunction,
};
pub use rank::{independence_rank, RankReport, RANK_TOLERANCE};

fn resolve_kind(params: &Parameters, kind: Option<ManifoldKind>, state: &PhaseState) -> Result<ManifoldKind> {
    match kind {
        Some(k) => Ok(k),
        None => Ok(classify_manifold(params, &state.q)?.kind),
    }
}

/// The Hamiltonian as a phase function. Without a fixed manifold the state
/// is classified on every call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hamiltonian {
    pub params: Parameters,
    pub kind: Option<ManifoldKind>,
}

impl Hamiltonian {
    pub fn new(params: Parameters) -> Self {
        Self { params, kind: None }
    }

    pub fn on(params: Parameters, kind: ManifoldKind) -> Self {
        Self {
            params,
            kind: Some(kind),
        }
    }
}

impl PhaseFunction for Hamiltonian {
    fn eval(&self, state: &PhaseState) -> Result<f64> {
        state.check_dim(&self.params)?;
        let kind = resolve_kind(&self.params, self.kind, state)?;
        evaluate_h_on(&self.params, kind, state)
    }

    fn analytic_gradient(&self, state: &PhaseState) -> Option<Result<PhaseGradient>> {
        Some(
            state
                .check_dim(&self.params)
                .and_then(|_| resolve_kind(&self.params, self.kind, state))
                .and_then(|kind| gradient_h_on(&self.params, kind, state)),
        )
    }

    fn label(&self) -> String {
        "H".into()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockOrder {
    /// `C^(m)`: pairs among the first `m` indices.
    Ascending,
    /// `C_(m)`: pairs among the last `m` indices.
    Descending,
}

/// One angular-momentum block `C^(m)` or `C_(m)`, `2 ≤ m ≤ N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AngularBlock {
    pub n_dim: usize,
    pub m: usize,
    pub order: BlockOrder,
}

impl AngularBlock {
    pub fn new(n_dim: usize, m: usize, order: BlockOrder) -> Result<Self> {
        if m < 2 || m > n_dim {
            return Err(Error::Parameter(format!(
                "block index m = {m} outside 2..={n_dim}"
            )));
        }
        Ok(Self { n_dim, m, order })
    }

    fn range(&self) -> std::ops::Range<usize> {
        match self.order {
            BlockOrder::Ascending => 0..self.m,
            BlockOrder::Descending => self.n_dim - self.m..self.n_dim,
        }
    }
}

fn block_value(q: &[f64], p: &[f64], range: std::ops::Range<usize>) -> f64 {
    let mut sum = 0.0;
    for i in range.clone() {
        for j in i + 1..range.end {
            let l = q[i] * p[j] - q[j] * p[i];
            sum += l * l;
        }
    }
    sum
}

impl PhaseFunction for AngularBlock {
    fn eval(&self, state: &PhaseState) -> Result<f64> {
        check_len(state, self.n_dim)?;
        Ok(block_value(&state.q, &state.p, self.range()))
    }

    fn analytic_gradient(&self, state: &PhaseState) -> Option<Result<PhaseGradient>> {
        if let Err(e) = check_len(state, self.n_dim) {
            return Some(Err(e));
        }
        let (q, p) = (&state.q, &state.p);
        let mut g = PhaseGradient::zeros(self.n_dim);
        let range = self.range();
        for i in range.clone() {
            for j in i + 1..range.end {
                let l2 = 2.0 * (q[i] * p[j] - q[j] * p[i]);
                g.dq[i] += l2 * p[j];
                g.dq[j] -= l2 * p[i];
                g.dp[j] += l2 * q[i];
                g.dp[i] -= l2 * q[j];
            }
        }
        Some(Ok(g))
    }

    fn label(&self) -> String {
        match self.order {
            BlockOrder::Ascending => format!("C^({})", self.m),
            BlockOrder::Descending => format!("C_({})", self.m),
        }
    }
}

fn check_len(state: &PhaseState, n: usize) -> Result<()> {
    if state.q.len() != n || state.p.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: state.q.len().min(state.p.len()),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AngularBlocks {
    /// `C^(m)` at index `m - 2`.
    pub upper: Vec<f64>,
    /// `C_(m)` at index `m - 2`.
    pub lower: Vec<f64>,
}

impl AngularBlocks {
    pub fn upper(&self, m: usize) -> f64 {
        self.upper[m - 2]
    }

    pub fn lower(&self, m: usize) -> f64 {
        self.lower[m - 2]
    }
}

pub fn angular_blocks(state: &PhaseState) -> Result<AngularBlocks> {
    let n = state.dim();
    if n < 2 || state.p.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n.max(2),
            actual: state.p.len(),
        });
    }
    let upper = (2..=n)
        .map(|m| block_value(&state.q, &state.p, 0..m))
        .collect();
    let lower = (2..=n)
        .map(|m| block_value(&state.q, &state.p, n - m..n))
        .collect();
    Ok(AngularBlocks { upper, lower })
}

/// One component `I_ij` of the curved Fradkin tensor (0-based indices).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FradkinComponent {
    pub params: Parameters,
    pub kind: Option<ManifoldKind>,
    pub i: usize,
    pub j: usize,
}

impl FradkinComponent {
    pub fn new(params: Parameters, i: usize, j: usize) -> Self {
        Self {
            params,
            kind: None,
            i,
            j,
        }
    }
}

/// Coefficient `K = 2 λ H_λ - ω²` together with the sign `σ` and `h`.
fn fradkin_coupling(params: &Parameters, kind: ManifoldKind, state: &PhaseState) -> Result<(f64, f64, f64)> {
    let h = evaluate_h_on(params, kind, state)?;
    let sigma = kind.sign();
    Ok((sigma, h, 2.0 * params.lambda * sigma * h - params.omega * params.omega))
}

impl PhaseFunction for FradkinComponent {
    fn eval(&self, state: &PhaseState) -> Result<f64> {
        state.check_dim(&self.params)?;
        let kind = resolve_kind(&self.params, self.kind, state)?;
        let (sigma, _, k) = fradkin_coupling(&self.params, kind, state)?;
        let (i, j) = (self.i, self.j);
        Ok(sigma * (state.p[i] * state.p[j] - k * state.q[i] * state.q[j]))
    }

    fn analytic_gradient(&self, state: &PhaseState) -> Option<Result<PhaseGradient>> {
        let run = || -> Result<PhaseGradient> {
            state.check_dim(&self.params)?;
            let kind = resolve_kind(&self.params, self.kind, state)?;
            let (sigma, _, k) = fradkin_coupling(&self.params, kind, state)?;
            let dh = gradient_h_on(&self.params, kind, state)?;
            let (i, j) = (self.i, self.j);
            let (q, p) = (&state.q, &state.p);
            let qq = q[i] * q[j];
            // ∂K = 2 λ σ ∂h
            let c = 2.0 * self.params.lambda * sigma;
            let mut g = PhaseGradient {
                dq: dh.dq.iter().map(|d| -sigma * c * d * qq).collect(),
                dp: dh.dp.iter().map(|d| -sigma * c * d * qq).collect(),
            };
            g.dq[i] -= sigma * k * q[j];
            g.dq[j] -= sigma * k * q[i];
            g.dp[i] += sigma * p[j];
            g.dp[j] += sigma * p[i];
            Ok(g)
        };
        Some(run())
    }

    fn label(&self) -> String {
        format!("I_{}{}", self.i + 1, self.j + 1)
    }
}

/// Full `N × N` Fradkin tensor at a phase point.
pub fn fradkin_tensor(params: &Parameters, state: &PhaseState) -> Result<DMatrix<f64>> {
    state.check_dim(params)?;
    let kind = classify_manifold(params, &state.q)?.kind;
    fradkin_tensor_on(params, kind, state)
}

pub fn fradkin_tensor_on(params: &Parameters, kind: ManifoldKind, state: &PhaseState) -> Result<DMatrix<f64>> {
    let (sigma, _, k) = fradkin_coupling(params, kind, state)?;
    let n = params.n_dim;
    let (q, p) = (&state.q, &state.p);
    Ok(DMatrix::from_fn(n, n, |i, j| {
        sigma * (p[i] * p[j] - k * q[i] * q[j])
    }))
}

/// Values of every integral of motion at one phase point.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralSet {
    pub c_upper: Vec<f64>,
    pub c_lower: Vec<f64>,
    pub fradkin: DMatrix<f64>,
    pub h: f64,
}

impl IntegralSet {
    pub fn evaluate(params: &Parameters, state: &PhaseState) -> Result<Self> {
        state.check_dim(params)?;
        let kind = classify_manifold(params, &state.q)?.kind;
        Self::evaluate_on(params, kind, state)
    }

    pub fn evaluate_on(params: &Parameters, kind: ManifoldKind, state: &PhaseState) -> Result<Self> {
        let blocks = angular_blocks(state)?;
        let fradkin = fradkin_tensor_on(params, kind, state)?;
        let h = evaluate_h_on(params, kind, state)?;
        Ok(Self {
            c_upper: blocks.upper,
            c_lower: blocks.lower,
            fradkin,
            h,
        })
    }

    /// `|½ tr I - h|`.
    pub fn half_trace_residual(&self) -> f64 {
        (0.5 * self.fradkin.trace() - self.h).abs()
    }

    /// Flattened values in a fixed order: `h`, `C^(m)`, `C_(m)`, then `I_ij`
    /// row-major.
    pub fn values(&self) -> Vec<f64> {
        let n = self.fradkin.nrows();
        let mut v = Vec::with_capacity(1 + self.c_upper.len() * 2 + n * n);
        v.push(self.h);
        v.extend_from_slice(&self.c_upper);
        v.extend_from_slice(&self.c_lower);
        for i in 0..n {
            for j in 0..n {
                v.push(self.fradkin[(i, j)]);
            }
        }
        v
    }

    pub fn labels(n: usize) -> Vec<String> {
        let mut v = vec!["H".to_string()];
        v.extend((2..=n).map(|m| format!("C^({m})")));
        v.extend((2..=n).map(|m| format!("C_({m})")));
        for i in 1..=n {
            for j in 1..=n {
                v.push(format!("I_{i}{j}"));
            }
        }
        v
    }
}

/// `{H, C^(2), ..., C^(N)}`.
pub fn ascending_chain(params: &Parameters) -> Vec<Box<dyn PhaseFunction>> {
    chain(params, BlockOrder::Ascending)
}

/// `{H, C_(2), ..., C_(N)}`.
pub fn descending_chain(params: &Parameters) -> Vec<Box<dyn PhaseFunction>> {
    chain(params, BlockOrder::Descending)
}

fn chain(params: &Parameters, order: BlockOrder) -> Vec<Box<dyn PhaseFunction>> {
    let n = params.n_dim;
    let mut set: Vec<Box<dyn PhaseFunction>> = vec![Box::new(Hamiltonian::new(*params))];
    for m in 2..=n {
        set.push(Box::new(AngularBlock { n_dim: n, m, order }));
    }
    set
}

/// `{I_11, ..., I_NN}`.
pub fn fradkin_diagonal(params: &Parameters) -> Vec<Box<dyn PhaseFunction>> {
    (0..params.n_dim)
        .map(|i| Box::new(FradkinComponent::new(*params, i, i)) as Box<dyn PhaseFunction>)
        .collect()
}

/// `{H, C^(m), C_(m), I_ii}` for `m = 2..N` and a fixed 0-based `i`. Note that
/// `C^(N) = C_(N)` appears twice, so the list has `2N` entries but only
/// `2N - 1` independent ones.
pub fn independent_set(params: &Parameters, i: usize) -> Vec<Box<dyn PhaseFunction>> {
    let n = params.n_dim;
    let mut set = ascending_chain(params);
    for m in 2..=n {
        set.push(Box::new(AngularBlock {
            n_dim: n,
            m,
            order: BlockOrder::Descending,
        }));
    }
    set.push(Box::new(FradkinComponent::new(*params, i, i)));
    set
}

/// Every angular block and every Fradkin component, without `H`.
pub fn all_integrals(params: &Parameters) -> Vec<Box<dyn PhaseFunction>> {
    let n = params.n_dim;
    let mut set: Vec<Box<dyn PhaseFunction>> = Vec::new();
    for order in [BlockOrder::Ascending, BlockOrder::Descending] {
        for m in 2..=n {
            set.push(Box::new(AngularBlock { n_dim: n, m, order }));
        }
    }
    for i in 0..n {
        for j in 0..n {
            set.push(Box::new(FradkinComponent::new(*params, i, j)));
        }
    }
    set
}

/// Seeded sampler of generic phase points on one manifold: `q` uniform in
/// direction with `|q|` uniform in an annulus clear of the origin and of
/// `r_c`, `p` uniform in direction with `|p|` in `[0.5, 2]`.
#[derive(Debug, Clone)]
pub struct GenericSampler {
    params: Parameters,
    kind: ManifoldKind,
    radius: (f64, f64),
    momentum: (f64, f64),
    rng: ChaCha8Rng,
}

impl GenericSampler {
    pub fn new(params: Parameters, kind: ManifoldKind, seed: u64) -> Result<Self> {
        if !kind.admits(params.lambda) {
            return Err(Error::Parameter(format!(
                "cannot sample the {kind} manifold with lambda = {}",
                params.lambda
            )));
        }
        let scale = if params.lambda == 0.0 {
            5.0
        } else {
            1.0 / params.lambda.abs().sqrt()
        };
        let radius = match kind {
            ManifoldKind::Flat => (0.1 * scale, 0.5 * scale),
            ManifoldKind::Hyperbolic => (0.1 * scale, 0.5 * scale),
            ManifoldKind::Interior => (0.1 * scale, 0.9 * scale),
            ManifoldKind::Exterior => (1.1 * scale, 2.0 * scale),
        };
        Ok(Self {
            params,
            kind,
            radius,
            momentum: (0.5, 2.0),
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn with_radius(mut self, low: f64, high: f64) -> Self {
        self.radius = (low, high);
        self
    }

    pub fn with_momentum(mut self, low: f64, high: f64) -> Self {
        self.momentum = (low, high);
        self
    }

    pub fn kind(&self) -> ManifoldKind {
        self.kind
    }

    fn direction(&mut self) -> Vec<f64> {
        let n = self.params.n_dim;
        loop {
            let v: Vec<f64> = (0..n).map(|_| self.rng.sample(StandardNormal)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-8 {
                return v.into_iter().map(|x| x / norm).collect();
            }
        }
    }

    pub fn sample(&mut self) -> PhaseState {
        let r = self.rng.gen_range(self.radius.0..=self.radius.1);
        let s = self.rng.gen_range(self.momentum.0..=self.momentum.1);
        let q = self.direction().into_iter().map(|x| r * x).collect();
        let p = self.direction().into_iter().map(|x| s * x).collect();
        PhaseState { q, p }
    }

    pub fn samples(&mut self, count: usize) -> Vec<PhaseState> {
        (0..count).map(|_| self.sample()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn state(q: &[f64], p: &[f64]) -> PhaseState {
        PhaseState::new(q.to_vec(), p.to_vec()).unwrap()
    }

    /// Brute-force `Σ_{i<j, i,j ∈ idx} (q_i p_j - q_j p_i)²` over an explicit index list.
    fn brute_block(s: &PhaseState, idx: &[usize]) -> f64 {
        let mut total = 0.0;
        for &i in idx {
            for &j in idx {
                if i < j {
                    total += (s.q[i] * s.p[j] - s.q[j] * s.p[i]).powi(2);
                }
            }
        }
        total
    }

    #[test]
    fn blocks_vanish_for_parallel_momenta() {
        let q = vec![0.3, -1.0, 2.5, 0.7];
        let p: Vec<f64> = q.iter().map(|x| -1.7 * x).collect();
        let b = angular_blocks(&state(&q, &p)).unwrap();
        assert!(b.upper.iter().chain(&b.lower).all(|v| v.abs() < 1e-24));
    }

    #[test]
    fn block_examples() {
        let b = angular_blocks(&state(&[1.0, 0.0], &[0.0, 1.0])).unwrap();
        assert_eq!(b.upper(2), 1.0);
        assert_eq!(b.lower(2), 1.0);

        let s = state(&[1.0, 2.0, 0.0], &[0.0, 1.0, 1.0]);
        let b = angular_blocks(&s).unwrap();
        assert_eq!(b.upper(2), brute_block(&s, &[0, 1]));
        assert_eq!(b.lower(2), brute_block(&s, &[1, 2]));
        assert_eq!(b.upper(3), brute_block(&s, &[0, 1, 2]));
        assert_eq!((b.upper(2), b.lower(2), b.upper(3), b.lower(3)), (1.0, 4.0, 6.0, 6.0));
    }

    #[test]
    fn top_blocks_coincide() {
        let mut sampler =
            GenericSampler::new(Parameters::new(0.1, 1.0, 5).unwrap(), ManifoldKind::Hyperbolic, 3)
                .unwrap();
        for s in sampler.samples(20) {
            let b = angular_blocks(&s).unwrap();
            assert_relative_eq!(b.upper(5), b.lower(5), max_relative = 1e-13);
            assert!(b.upper.iter().chain(&b.lower).all(|v| *v >= 0.0));
        }
    }

    #[test]
    fn fradkin_examples() {
        let params = Parameters::new(0.02, 1.0, 2).unwrap();
        let origin = state(&[0.0, 0.0], &[1.5, -0.5]);
        let t = fradkin_tensor(&params, &origin).unwrap();
        assert_eq!(t[(0, 0)], 2.25);
        assert_eq!(t[(0, 1)], -0.75);
        assert_eq!(t[(1, 1)], 0.25);

        let flat = Parameters::new(0.0, 2.0, 2).unwrap();
        let s = state(&[0.5, -1.0], &[0.3, 0.4]);
        let t = fradkin_tensor(&flat, &s).unwrap();
        assert_relative_eq!(t[(0, 1)], 0.3 * 0.4 - 4.0 * 0.5, epsilon = 1e-15);

        let s = state(&[1.0, 0.0], &[0.0, 1.0]);
        let t = fradkin_tensor(&params, &s).unwrap();
        assert_relative_eq!(t[(0, 0)], 1.0 - 0.04 / 1.02, epsilon = 1e-15);
        assert_relative_eq!(t[(0, 0)], 0.960_784_313_725_490_2, epsilon = 1e-15);
        assert_eq!(t[(0, 1)], 0.0);
        assert_eq!(t[(1, 1)], 1.0);
        let set = IntegralSet::evaluate(&params, &s).unwrap();
        assert!(set.half_trace_residual() < 1e-15);
    }

    #[test]
    fn half_trace_on_every_manifold() {
        for (lambda, kind) in [
            (0.02, ManifoldKind::Hyperbolic),
            (-0.02, ManifoldKind::Interior),
            (-0.02, ManifoldKind::Exterior),
            (0.0, ManifoldKind::Flat),
        ] {
            let params = Parameters::new(lambda, 1.3, 4).unwrap();
            let mut sampler = GenericSampler::new(params, kind, 11).unwrap();
            for s in sampler.samples(50) {
                let set = IntegralSet::evaluate(&params, &s).unwrap();
                assert!(set.half_trace_residual() <= 1e-12, "{kind}: {}", set.half_trace_residual());
                assert!((&set.fradkin - set.fradkin.transpose()).amax() < 1e-13);
            }
        }
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        for (lambda, kind) in [
            (0.02, ManifoldKind::Hyperbolic),
            (-0.02, ManifoldKind::Interior),
            (-0.02, ManifoldKind::Exterior),
        ] {
            let params = Parameters::new(lambda, 0.8, 3).unwrap();
            let mut sampler = GenericSampler::new(params, kind, 5).unwrap();
            let funcs = all_integrals(&params);
            for s in sampler.samples(10) {
                for f in &funcs {
                    let a = gradient(f.as_ref(), &s).unwrap().to_flat();
                    let d = fd_gradient(f.as_ref(), &s).unwrap().to_flat();
                    let scale = a.iter().fold(1.0f64, |m, v| m.max(v.abs()));
                    for (x, y) in a.iter().zip(&d) {
                        assert!((x - y).abs() <= 1e-6 * scale, "{} {kind}: {x} vs {y}", f.label());
                    }
                }
            }
        }
    }

    #[test]
    fn sampler_is_deterministic_and_in_domain() {
        let params = Parameters::new(-0.02, 1.0, 3).unwrap();
        let a = GenericSampler::new(params, ManifoldKind::Exterior, 42).unwrap().samples(5);
        let b = GenericSampler::new(params, ManifoldKind::Exterior, 42).unwrap().samples(5);
        assert_eq!(a, b);
        for s in &a {
            assert_eq!(
                classify_manifold(&params, &s.q).unwrap().kind,
                ManifoldKind::Exterior
            );
        }
        assert!(GenericSampler::new(params, ManifoldKind::Hyperbolic, 1).is_err());
    }
}
