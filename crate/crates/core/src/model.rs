//! Parameters, phase-space states and the deformed oscillator Hamiltonian
//!
//! ```text
//!     H = (p² + ω² q²) / (2 (1 + λ q²))
//! ```
//!
//! together with the conformal metric factor `1 + λ q²`, its scalar
//! curvature and the split of configuration space into the three manifolds
//! selected by the sign of `λ` and the critical radius `r_c = 1/√|λ|`.
//!
//! On the exterior manifold (`λ < 0`, `|q| > r_c`) both the metric factor and
//! the Hamiltonian change sign so that the kinetic term stays positive. Every
//! formula below is written in terms of the *signed* metric factor
//! `g = σ (1 + λ q²)` with `σ = -1` on the exterior and `+1` elsewhere, so
//! that `g > 0` on every domain and `H = (p² + ω² q²) / (2 g)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative width of the excluded band around `r_c`.
pub const DEFAULT_GUARD: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Parameters {
    pub lambda: f64,
    pub omega: f64,
    pub n_dim: usize,
    pub hbar: f64,
    /// Guard band around `r_c`, as a fraction of `r_c`.
    #[serde(default = "default_guard")]
    pub guard: f64,
}

fn default_guard() -> f64 {
    DEFAULT_GUARD
}

impl Parameters {
    pub fn new(lambda: f64, omega: f64, n_dim: usize) -> Result<Self> {
        Self {
            lambda,
            omega,
            n_dim,
            hbar: 1.0,
            guard: DEFAULT_GUARD,
        }
        .validated()
    }

    pub fn with_hbar(mut self, hbar: f64) -> Result<Self> {
        self.hbar = hbar;
        self.validated()
    }

    pub fn with_guard(mut self, guard: f64) -> Result<Self> {
        self.guard = guard;
        self.validated()
    }

    pub fn validated(self) -> Result<Self> {
        if self.n_dim < 2 {
            return Err(Error::Parameter(format!(
                "n_dim must be at least 2, got {}",
                self.n_dim
            )));
        }
        if !self.lambda.is_finite() {
            return Err(Error::Parameter("lambda must be finite".into()));
        }
        if !(self.omega.is_finite() && self.omega >= 0.0) {
            return Err(Error::Parameter(format!(
                "omega must be finite and non-negative, got {}",
                self.omega
            )));
        }
        if !(self.hbar.is_finite() && self.hbar > 0.0) {
            return Err(Error::Parameter(format!(
                "hbar must be positive, got {}",
                self.hbar
            )));
        }
        if !(self.guard.is_finite() && self.guard >= 0.0) {
            return Err(Error::Parameter("guard must be non-negative".into()));
        }
        Ok(self)
    }

    /// `r_c = 1/√|λ|`, defined only for `λ < 0`.
    pub fn critical_radius(&self) -> Option<f64> {
        (self.lambda < 0.0).then(|| 1.0 / (-self.lambda).sqrt())
    }

    /// Absolute half-width of the band around `r_c` in which states are rejected.
    pub fn guard_width(&self) -> Option<f64> {
        self.critical_radius().map(|rc| self.guard * rc)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

impl PhaseState {
    pub fn new(q: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        if q.len() != p.len() {
            return Err(Error::DimensionMismatch {
                expected: q.len(),
                actual: p.len(),
            });
        }
        Ok(Self { q, p })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            q: vec![0.0; n],
            p: vec![0.0; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn q_squared(&self) -> f64 {
        dot(&self.q, &self.q)
    }

    pub fn p_squared(&self) -> f64 {
        dot(&self.p, &self.p)
    }

    pub fn radius(&self) -> f64 {
        self.q_squared().sqrt()
    }

    /// Flattened `(q_1..q_N, p_1..p_N)`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut y = Vec::with_capacity(2 * self.dim());
        y.extend_from_slice(&self.q);
        y.extend_from_slice(&self.p);
        y
    }

    pub fn from_flat(y: &[f64]) -> Self {
        let n = y.len() / 2;
        Self {
            q: y[..n].to_vec(),
            p: y[n..].to_vec(),
        }
    }

    pub(crate) fn check_dim(&self, params: &Parameters) -> Result<()> {
        if self.q.len() != params.n_dim {
            return Err(Error::DimensionMismatch {
                expected: params.n_dim,
                actual: self.q.len(),
            });
        }
        if self.p.len() != params.n_dim {
            return Err(Error::DimensionMismatch {
                expected: params.n_dim,
                actual: self.p.len(),
            });
        }
        Ok(())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManifoldKind {
    /// `λ = 0`, Euclidean space.
    Flat,
    /// Type I: `λ > 0`, complete manifold on all of ℝ^N.
    Hyperbolic,
    /// Type II: `λ < 0`, the ball `|q| < r_c`.
    Interior,
    /// Type III: `λ < 0`, the exterior `|q| > r_c`, with reversed signs.
    Exterior,
}

impl ManifoldKind {
    /// Sign `σ` relating the signed metric factor to `1 + λ q²`.
    pub fn sign(self) -> f64 {
        match self {
            ManifoldKind::Exterior => -1.0,
            _ => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ManifoldKind::Flat => "flat",
            ManifoldKind::Hyperbolic => "hyperbolic",
            ManifoldKind::Interior => "interior",
            ManifoldKind::Exterior => "exterior",
        }
    }

    /// Whether this kind is consistent with the sign of `λ`.
    pub fn admits(self, lambda: f64) -> bool {
        match self {
            ManifoldKind::Flat => lambda == 0.0,
            ManifoldKind::Hyperbolic => lambda > 0.0,
            ManifoldKind::Interior | ManifoldKind::Exterior => lambda < 0.0,
        }
    }
}

impl std::fmt::Display for ManifoldKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ManifoldKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "flat" => Ok(ManifoldKind::Flat),
            "hyperbolic" | "type-i" | "i" => Ok(ManifoldKind::Hyperbolic),
            "interior" | "spherical" | "type-ii" | "ii" => Ok(ManifoldKind::Interior),
            "exterior" | "type-iii" | "iii" => Ok(ManifoldKind::Exterior),
            other => Err(Error::Parameter(format!("unknown manifold kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManifoldType {
    pub kind: ManifoldKind,
    pub r_c: Option<f64>,
}

/// Classify the manifold containing the configuration point `q`.
pub fn classify_manifold(params: &Parameters, q: &[f64]) -> Result<ManifoldType> {
    classify_radius(params, dot(q, q).sqrt())
}

pub fn classify_radius(params: &Parameters, r: f64) -> Result<ManifoldType> {
    let lambda = params.lambda;
    if lambda == 0.0 {
        return Ok(ManifoldType {
            kind: ManifoldKind::Flat,
            r_c: None,
        });
    }
    if lambda > 0.0 {
        return Ok(ManifoldType {
            kind: ManifoldKind::Hyperbolic,
            r_c: None,
        });
    }
    let rc = 1.0 / (-lambda).sqrt();
    let delta = params.guard * rc;
    if (r - rc).abs() <= delta {
        return Err(Error::Singularity {
            radius: r,
            critical_radius: rc,
        });
    }
    let kind = if r < rc {
        ManifoldKind::Interior
    } else {
        ManifoldKind::Exterior
    };
    Ok(ManifoldType {
        kind,
        r_c: Some(rc),
    })
}

/// Signed metric factor: `1 + λ q²`, or `|λ| q² - 1` outside `r_c`.
pub fn metric_factor(params: &Parameters, q: &[f64]) -> f64 {
    metric_factor_at_radius(params, dot(q, q).sqrt())
}

pub fn metric_factor_at_radius(params: &Parameters, r: f64) -> f64 {
    let base = 1.0 + params.lambda * r * r;
    if params.lambda < 0.0 && base < 0.0 {
        -base
    } else {
        base
    }
}

/// Metric factor for an explicitly chosen manifold, which may be non-positive
/// when `r` lies outside that manifold.
pub fn metric_factor_on(params: &Parameters, kind: ManifoldKind, r: f64) -> f64 {
    kind.sign() * (1.0 + params.lambda * r * r)
}

/// Checks that a radius belongs to `kind`, honouring the guard band.
pub fn check_radius_on(params: &Parameters, kind: ManifoldKind, r: f64) -> Result<()> {
    if !kind.admits(params.lambda) {
        return Err(Error::Domain(format!(
            "manifold `{kind}` is incompatible with lambda = {}",
            params.lambda
        )));
    }
    let (rc, delta) = match (params.critical_radius(), params.guard_width()) {
        (Some(rc), Some(d)) => (rc, d),
        _ => return Ok(()),
    };
    let inside = match kind {
        ManifoldKind::Interior => r < rc - delta,
        ManifoldKind::Exterior => r > rc + delta,
        _ => true,
    };
    if inside {
        Ok(())
    } else if (r - rc).abs() <= delta {
        Err(Error::Singularity {
            radius: r,
            critical_radius: rc,
        })
    } else {
        Err(Error::Domain(format!(
            "|q| = {r} is not in the {kind} domain (r_c = {rc})"
        )))
    }
}

/// `H` at a phase point, on the manifold the point belongs to.
pub fn evaluate_h(params: &Parameters, state: &PhaseState) -> Result<f64> {
    state.check_dim(params)?;
    let kind = classify_manifold(params, &state.q)?.kind;
    evaluate_h_on(params, kind, state)
}

/// `H` on a prescribed manifold; fails if the state is not in it.
pub fn evaluate_h_on(params: &Parameters, kind: ManifoldKind, state: &PhaseState) -> Result<f64> {
    state.check_dim(params)?;
    let q2 = state.q_squared();
    check_radius_on(params, kind, q2.sqrt())?;
    let g = metric_factor_on(params, kind, q2.sqrt());
    if g <= 0.0 {
        return Err(Error::Domain(format!("metric factor {g} is not positive")));
    }
    let w2 = params.omega * params.omega;
    Ok((state.p_squared() + w2 * q2) / (2.0 * g))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseGradient {
    pub dq: Vec<f64>,
    pub dp: Vec<f64>,
}

impl PhaseGradient {
    pub fn zeros(n: usize) -> Self {
        Self {
            dq: vec![0.0; n],
            dp: vec![0.0; n],
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = self.dq.clone();
        v.extend_from_slice(&self.dp);
        v
    }
}

pub fn gradient_h(params: &Parameters, state: &PhaseState) -> Result<PhaseGradient> {
    state.check_dim(params)?;
    let kind = classify_manifold(params, &state.q)?.kind;
    gradient_h_on(params, kind, state)
}

/// Analytic gradient of `H = A / (2g)` with `A = p² + ω² q²` and
/// `g = σ (1 + λ q²)`:
///
/// ```text
///     ∂H/∂p_i = p_i / g
///     ∂H/∂q_i = q_i (ω² g - σ λ A) / g²
/// ```
///
/// For `σ = +1` the bracket reduces to `ω² - λ p²`. On the exterior
/// (`σ = -1`, `g = |λ| q² - 1`) it becomes `-(ω² + |λ| p²)`, i.e. the
/// gradient of the sign-reversed Hamiltonian is minus the gradient of the
/// unreversed formula.
pub fn gradient_h_on(
    params: &Parameters,
    kind: ManifoldKind,
    state: &PhaseState,
) -> Result<PhaseGradient> {
    state.check_dim(params)?;
    let q2 = state.q_squared();
    check_radius_on(params, kind, q2.sqrt())?;
    let sigma = kind.sign();
    let g = metric_factor_on(params, kind, q2.sqrt());
    if g <= 0.0 {
        return Err(Error::Domain(format!("metric factor {g} is not positive")));
    }
    let w2 = params.omega * params.omega;
    let a = state.p_squared() + w2 * q2;
    let radial = (w2 * g - sigma * params.lambda * a) / (g * g);
    Ok(PhaseGradient {
        dq: state.q.iter().map(|qi| qi * radial).collect(),
        dp: state.p.iter().map(|pi| pi / g).collect(),
    })
}

/// Scalar curvature of the conformally flat metric at radius `r`.
pub fn scalar_curvature(params: &Parameters, r: f64) -> Result<f64> {
    if r < 0.0 {
        return Err(Error::Domain(format!("negative radius {r}")));
    }
    let kind = classify_radius(params, r)?.kind;
    Ok(scalar_curvature_on(params, kind, r))
}

/// ```text
///     R(r) = -λ (N-1) (2N + 3 (N-2) λ r²) / (1 + λ r²)³
/// ```
///
/// with the overall sign reversed on the exterior manifold.
pub fn scalar_curvature_on(params: &Parameters, kind: ManifoldKind, r: f64) -> f64 {
    let lambda = params.lambda;
    if lambda == 0.0 {
        return 0.0;
    }
    let n = params.n_dim as f64;
    let x = lambda * r * r;
    let base = 1.0 + x;
    kind.sign() * (-lambda * (n - 1.0) * (2.0 * n + 3.0 * (n - 2.0) * x) / (base * base * base))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureExtremum {
    pub r: f64,
    pub curvature: f64,
}

/// Interior extremum of `R(r)` for `λ < 0`: a positive maximum inside `r_c`
/// when `N ≥ 7`, a negative minimum outside `r_c` when `3 ≤ N ≤ 5`. Both sit
/// at `|λ| r² = (N+2) / (2(N-2))`.
pub fn curvature_extrema(params: &Parameters, kind: ManifoldKind) -> Option<CurvatureExtremum> {
    if params.lambda >= 0.0 {
        return None;
    }
    let n = params.n_dim;
    let admits = match kind {
        ManifoldKind::Interior => n >= 7,
        ManifoldKind::Exterior => (3..=5).contains(&n),
        _ => false,
    };
    if !admits {
        return None;
    }
    let nf = n as f64;
    let abs_lambda = -params.lambda;
    let r = ((nf + 2.0) / (2.0 * (nf - 2.0) * abs_lambda)).sqrt();
    let magnitude = 4.0 * abs_lambda * (nf - 1.0) * (nf - 2.0).powi(3) / (nf - 6.0).powi(2);
    let curvature = match kind {
        ManifoldKind::Interior => magnitude,
        _ => -magnitude,
    };
    Some(CurvatureExtremum { r, curvature })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn state(q: &[f64], p: &[f64]) -> PhaseState {
        PhaseState::new(q.to_vec(), p.to_vec()).unwrap()
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(Parameters::new(0.1, 1.0, 1).is_err());
        assert!(Parameters::new(0.1, -1.0, 2).is_err());
        assert!(Parameters::new(0.1, 1.0, 2).unwrap().with_hbar(0.0).is_err());
        assert!(PhaseState::new(vec![0.0; 2], vec![0.0; 3]).is_err());
    }

    #[test]
    fn hamiltonian_values() {
        for lambda in [0.3, 0.0, -0.02] {
            let params = Parameters::new(lambda, 1.7, 3).unwrap();
            let h = evaluate_h(&params, &PhaseState::zeros(3)).unwrap();
            assert_eq!(h, 0.0);
        }
        let flat = Parameters::new(0.0, 2.0, 2).unwrap();
        let s = state(&[0.5, -1.0], &[0.3, 0.4]);
        let expected = 0.5 * (0.09 + 0.16) + 0.5 * 4.0 * (0.25 + 1.0);
        assert_relative_eq!(evaluate_h(&flat, &s).unwrap(), expected, epsilon = 1e-15);

        let params = Parameters::new(0.02, 1.0, 2).unwrap();
        let h = evaluate_h(&params, &state(&[1.0, 0.0], &[0.0, 1.0])).unwrap();
        assert_relative_eq!(h, 0.980_392_156_862_745_1, epsilon = 1e-15);
    }

    #[test]
    fn exterior_hamiltonian_is_sign_reversed() {
        let params = Parameters::new(-0.02, 1.0, 2).unwrap();
        let s = state(&[10.0, 0.0], &[0.5, 1.0]);
        let h = evaluate_h(&params, &s).unwrap();
        let unreversed = (1.25 + 100.0) / (2.0 * (1.0 - 0.02 * 100.0));
        assert_relative_eq!(h, -unreversed, epsilon = 1e-13);
        assert!(h > 0.0);
    }

    #[test]
    fn domain_errors() {
        let params = Parameters::new(-0.02, 1.0, 2).unwrap();
        let inside = state(&[1.0, 0.0], &[0.0, 0.0]);
        let outside = state(&[10.0, 0.0], &[0.0, 0.0]);
        assert!(matches!(
            evaluate_h_on(&params, ManifoldKind::Exterior, &inside),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            evaluate_h_on(&params, ManifoldKind::Interior, &outside),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            evaluate_h_on(&params, ManifoldKind::Hyperbolic, &inside),
            Err(Error::Domain(_))
        ));
        let rc = params.critical_radius().unwrap();
        let on_rc = state(&[rc, 0.0], &[0.0, 0.0]);
        assert!(matches!(
            evaluate_h(&params, &on_rc),
            Err(Error::Singularity { .. })
        ));
    }

    #[test]
    fn gradient_examples() {
        let params = Parameters::new(0.02, 1.0, 2).unwrap();
        let zero = gradient_h(&params, &PhaseState::zeros(2)).unwrap();
        assert!(zero.dq.iter().chain(&zero.dp).all(|v| *v == 0.0));

        let flat = Parameters::new(0.0, 1.5, 2).unwrap();
        let g = gradient_h(&flat, &state(&[0.2, -0.7], &[1.0, 3.0])).unwrap();
        assert_relative_eq!(g.dq[0], 2.25 * 0.2, epsilon = 1e-15);
        assert_relative_eq!(g.dq[1], 2.25 * -0.7, epsilon = 1e-15);
        assert_eq!(g.dp, vec![1.0, 3.0]);

        // Frozen from a central-difference oracle with step 1e-6.
        let g = gradient_h(&params, &state(&[1.0, 0.0], &[0.0, 1.0])).unwrap();
        assert_relative_eq!(g.dp[1], 0.980_392_156_862_745, epsilon = 1e-12);
        assert_relative_eq!(g.dq[0], 0.941_945_405_613_225_7, epsilon = 1e-12);
        assert_eq!(g.dq[1], 0.0);
        assert_eq!(g.dp[0], 0.0);
    }

    #[test]
    fn metric_factor_values() {
        let flat = Parameters::new(0.0, 1.0, 3).unwrap();
        assert_eq!(metric_factor(&flat, &[3.0, 4.0, 5.0]), 1.0);
        let hyp = Parameters::new(0.02, 1.0, 2).unwrap();
        assert_relative_eq!(metric_factor(&hyp, &[1.0, 0.0]), 1.02, epsilon = 1e-15);
        let sph = Parameters::new(-0.02, 1.0, 2).unwrap();
        let rc = sph.critical_radius().unwrap();
        assert_relative_eq!(rc, 7.071_067_811_865_475, epsilon = 1e-14);
        assert!(metric_factor(&sph, &[rc, 0.0]).abs() < 1e-15);
        assert_relative_eq!(metric_factor(&sph, &[10.0, 0.0]), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn curvature_at_origin() {
        for n in 2..=9 {
            for lambda in [0.02, -0.02, 1.3, -0.7] {
                let params = Parameters::new(lambda, 1.0, n).unwrap();
                let nf = n as f64;
                let r0 = scalar_curvature(&params, 0.0).unwrap();
                assert_relative_eq!(r0, -2.0 * lambda * nf * (nf - 1.0), max_relative = 1e-15);
            }
        }
        let flat = Parameters::new(0.0, 1.0, 4).unwrap();
        assert_eq!(scalar_curvature(&flat, 3.0).unwrap(), 0.0);
    }

    #[test]
    fn curvature_diverges_at_rc() {
        let params = Parameters::new(-0.02, 1.0, 3).unwrap();
        let rc = params.critical_radius().unwrap();
        let near = scalar_curvature(&params, rc * (1.0 - 1e-6)).unwrap();
        assert!(near > 1e12);
        assert!(matches!(
            scalar_curvature(&params, rc),
            Err(Error::Singularity { .. })
        ));
    }

    #[test]
    fn curvature_extrema_closed_forms() {
        let p3 = Parameters::new(-0.02, 1.0, 3).unwrap();
        assert!(curvature_extrema(&p3, ManifoldKind::Interior).is_none());
        let p7 = Parameters::new(-0.02, 1.0, 7).unwrap();
        let e = curvature_extrema(&p7, ManifoldKind::Interior).unwrap();
        assert_relative_eq!(e.r, 45f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(e.curvature, 60.0, epsilon = 1e-10);
        let p4 = Parameters::new(-0.02, 1.0, 4).unwrap();
        let e = curvature_extrema(&p4, ManifoldKind::Exterior).unwrap();
        assert_relative_eq!(e.r, 75f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(e.curvature, -0.48, epsilon = 1e-12);
        for n in [2, 6, 7, 9] {
            let p = Parameters::new(-0.02, 1.0, n).unwrap();
            assert!(curvature_extrema(&p, ManifoldKind::Exterior).is_none());
        }
        let hyp = Parameters::new(0.02, 1.0, 7).unwrap();
        assert!(curvature_extrema(&hyp, ManifoldKind::Hyperbolic).is_none());
    }

    #[test]
    fn classification() {
        let hyp = Parameters::new(0.02, 1.0, 2).unwrap();
        assert_eq!(
            classify_manifold(&hyp, &[100.0, 0.0]).unwrap().kind,
            ManifoldKind::Hyperbolic
        );
        let sph = Parameters::new(-0.02, 1.0, 2).unwrap();
        let t = classify_manifold(&sph, &[1.0, 0.0]).unwrap();
        assert_eq!(t.kind, ManifoldKind::Interior);
        assert_relative_eq!(t.r_c.unwrap(), 7.0711, epsilon = 1e-4);
        assert_eq!(
            classify_manifold(&sph, &[10.0, 0.0]).unwrap().kind,
            ManifoldKind::Exterior
        );
        let flat = Parameters::new(0.0, 1.0, 2).unwrap();
        assert_eq!(
            classify_manifold(&flat, &[1.0, 0.0]).unwrap().kind,
            ManifoldKind::Flat
        );
    }
}
