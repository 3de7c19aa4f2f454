//! Radial reduction and effective potentials.
//!
//! In hyperspherical coordinates the Hamiltonian only depends on `r`, `p_r`
//! and the total angular momentum `L² = C_(N)`:
//!
//! ```text
//!     H(r, p_r) = (p_r² + L²/r² + ω² r²) / (2 g(r))
//! ```
//!
//! with `g` the signed metric factor. A point transformation `Q(r)` with
//! `dQ/dr = √g` and `P = p_r/√g` flattens the kinetic term, leaving
//! `H = ½P² + U_eff(Q)`.

use serde::ser::{Serialize, Serializer};
use serde::Serialize as DeriveSerialize;

use crate::error::{Error, Result};
use crate::model::{check_radius_on, dot, metric_factor_on, ManifoldKind, Parameters, PhaseState};

/// Radial phase point together with the conserved value of `L²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialState {
    pub r: f64,
    pub p_r: f64,
    pub c_n: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hyperspherical {
    pub r: f64,
    /// `θ_1..θ_{N-1}`; all but the last lie in `[0, π]`, the last in `(-π, π]`.
    pub angles: Vec<f64>,
    pub p_r: f64,
    pub angle_momenta: Vec<f64>,
    pub l_squared: f64,
}

impl Hyperspherical {
    pub fn radial_state(&self) -> RadialState {
        RadialState {
            r: self.r,
            p_r: self.p_r,
            c_n: self.l_squared,
        }
    }
}

/// Jacobian `∂q_i/∂θ_j` of the chart, plus the unit radial vector.
fn chart_jacobian(r: f64, angles: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = angles.len() + 1;
    let (sin, cos): (Vec<f64>, Vec<f64>) = angles.iter().map(|t| t.sin_cos()).unzip();
    // unit[i] = q_i / r
    let unit: Vec<f64> = (0..n)
        .map(|i| {
            let head: f64 = sin[..i.min(n - 1)].iter().product();
            if i < n - 1 {
                head * cos[i]
            } else {
                head
            }
        })
        .collect();
    let mut jac = vec![vec![0.0; n - 1]; n];
    for (i, row) in jac.iter_mut().enumerate() {
        for (j, entry) in row.iter_mut().enumerate() {
            if i < j {
                continue;
            }
            // Differentiate the product factor that depends on θ_j.
            let mut v = r;
            for k in 0..i.min(n - 1) {
                v *= if k == j { cos[k] } else { sin[k] };
            }
            if i < n - 1 {
                v *= if i == j { -sin[i] } else { cos[i] };
            }
            *entry = v;
        }
    }
    (unit, jac)
}

pub fn to_hyperspherical(state: &PhaseState) -> Result<Hyperspherical> {
    let n = state.dim();
    if n < 2 || state.p.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n.max(2),
            actual: state.p.len(),
        });
    }
    let q = &state.q;
    let r = dot(q, q).sqrt();
    if r == 0.0 {
        return Err(Error::Origin);
    }
    let mut angles = Vec::with_capacity(n - 1);
    for j in 0..n - 2 {
        let tail = q[j + 1..].iter().map(|x| x * x).sum::<f64>().sqrt();
        angles.push(tail.atan2(q[j]));
    }
    angles.push(q[n - 1].atan2(q[n - 2]));
    for (k, theta) in angles[..n - 2].iter().enumerate() {
        if theta.sin().abs() <= 1e-12 {
            return Err(Error::Chart { index: k + 1 });
        }
    }
    let (unit, jac) = chart_jacobian(r, &angles);
    let p_r = dot(&unit, &state.p);
    let angle_momenta: Vec<f64> = (0..n - 1)
        .map(|j| (0..n).map(|i| state.p[i] * jac[i][j]).sum())
        .collect();
    let mut l_squared = 0.0;
    let mut weight = 1.0;
    for (j, pj) in angle_momenta.iter().enumerate() {
        if j > 0 {
            let s = angles[j - 1].sin();
            weight /= s * s;
        }
        l_squared += pj * pj * weight;
    }
    Ok(Hyperspherical {
        r,
        angles,
        p_r,
        angle_momenta,
        l_squared,
    })
}

/// Inverse chart: rebuilds `(q, p)` from hyperspherical data.
pub fn from_hyperspherical(h: &Hyperspherical) -> Result<PhaseState> {
    let n = h.angles.len() + 1;
    let (unit, jac) = chart_jacobian(h.r, &h.angles);
    let q: Vec<f64> = unit.iter().map(|u| h.r * u).collect();
    // p_polar = Jᵀ p with J = [∂q/∂r | ∂q/∂θ]
    let jm = nalgebra::DMatrix::from_fn(n, n, |i, j| if j == 0 { unit[i] } else { jac[i][j - 1] });
    let mut rhs = vec![h.p_r];
    rhs.extend_from_slice(&h.angle_momenta);
    let p = jm
        .transpose()
        .lu()
        .solve(&nalgebra::DVector::from_vec(rhs))
        .ok_or(Error::Chart { index: 0 })?;
    Ok(PhaseState {
        q,
        p: p.iter().copied().collect(),
    })
}

/// `(r, p_r, L²)` straight from Cartesian data, with `L² = q² p² - (q·p)²`.
/// Unlike [`to_hyperspherical`] this has no chart singularities off the origin.
pub fn radial_reduction(state: &PhaseState) -> Result<RadialState> {
    let r = state.radius();
    if r == 0.0 {
        return Err(Error::Origin);
    }
    let qp = dot(&state.q, &state.p);
    let c_n = (state.q_squared() * state.p_squared() - qp * qp).max(0.0);
    Ok(RadialState {
        r,
        p_r: qp / r,
        c_n,
    })
}

/// `(p_r² + c_N/r² + ω² r²) / (2 g(r))`.
pub fn radial_hamiltonian(params: &Parameters, kind: ManifoldKind, s: &RadialState) -> Result<f64> {
    check_radial_domain(params, kind, s.r)?;
    if s.r == 0.0 {
        return Err(Error::Domain("radial Hamiltonian undefined at r = 0".into()));
    }
    let g = metric_factor_on(params, kind, s.r);
    let w2 = params.omega * params.omega;
    Ok((s.p_r * s.p_r + s.c_n / (s.r * s.r) + w2 * s.r * s.r) / (2.0 * g))
}

fn check_radial_domain(params: &Parameters, kind: ManifoldKind, r: f64) -> Result<()> {
    if !(r >= 0.0) {
        return Err(Error::Domain(format!("radius {r} is negative")));
    }
    check_radius_on(params, kind, r)
}

/// Right end of the radial interval for the transform, `r ∈ [0, r_c)` on the
/// interior and `[r_c, ∞)` on the exterior.
fn check_transform_domain(params: &Parameters, kind: ManifoldKind, r: f64) -> Result<()> {
    if !kind.admits(params.lambda) {
        return Err(Error::Domain(format!(
            "manifold `{kind}` is incompatible with lambda = {}",
            params.lambda
        )));
    }
    let ok = match (kind, params.critical_radius()) {
        (ManifoldKind::Interior, Some(rc)) => (0.0..rc).contains(&r),
        (ManifoldKind::Exterior, Some(rc)) => r >= rc && r.is_finite(),
        _ => r >= 0.0 && r.is_finite(),
    };
    if ok {
        Ok(())
    } else {
        Err(Error::Domain(format!("r = {r} outside the {kind} interval")))
    }
}

/// `Q(r)`, with `dQ/dr = √g` and `Q(0) = 0` (or `Q(r_c) = 0` on the exterior).
pub fn canonical_q(params: &Parameters, r: f64, kind: ManifoldKind) -> Result<f64> {
    check_transform_domain(params, kind, r)?;
    Ok(q_unchecked(params.lambda, r, kind))
}

fn q_unchecked(lambda: f64, r: f64, kind: ManifoldKind) -> f64 {
    match kind {
        ManifoldKind::Flat => r,
        ManifoldKind::Hyperbolic => {
            let s = lambda.sqrt();
            0.5 * r * (1.0 + lambda * r * r).sqrt() + (s * r).asinh() / (2.0 * s)
        }
        ManifoldKind::Interior => {
            let s = (-lambda).sqrt();
            let x = (s * r).min(1.0);
            0.5 * r * (1.0 - x * x).max(0.0).sqrt() + x.asin() / (2.0 * s)
        }
        ManifoldKind::Exterior => {
            let s = (-lambda).sqrt();
            let x = (s * r).max(1.0);
            0.5 * r * (x * x - 1.0).sqrt() - x.acosh() / (2.0 * s)
        }
    }
}

/// `P = p_r / √g`.
pub fn canonical_p(params: &Parameters, r: f64, p_r: f64, kind: ManifoldKind) -> Result<f64> {
    check_transform_domain(params, kind, r)?;
    let g = metric_factor_on(params, kind, r);
    if g <= 0.0 {
        return Err(Error::Domain(format!("metric factor vanishes at r = {r}")));
    }
    Ok(p_r / g.sqrt())
}

/// Critical value of `Q`: `π/(4√|λ|)` bounds the interior image, and the
/// exterior image starts at `0` with the anchoring used by [`canonical_q`].
pub fn critical_q(params: &Parameters, kind: ManifoldKind) -> Option<f64> {
    match kind {
        ManifoldKind::Interior if params.lambda < 0.0 => {
            Some(std::f64::consts::PI / (4.0 * (-params.lambda).sqrt()))
        }
        ManifoldKind::Exterior if params.lambda < 0.0 => Some(0.0),
        _ => None,
    }
}

/// Inverse of [`canonical_q`] by safeguarded Newton iteration inside a
/// monotone bracket.
pub fn invert_q(params: &Parameters, target: f64, kind: ManifoldKind) -> Result<f64> {
    if !kind.admits(params.lambda) {
        return Err(Error::Domain(format!(
            "manifold `{kind}` is incompatible with lambda = {}",
            params.lambda
        )));
    }
    if !(target >= 0.0) || !target.is_finite() {
        return Err(Error::Range {
            value: target,
            low: 0.0,
            high: critical_q(params, kind)
                .filter(|_| kind == ManifoldKind::Interior)
                .unwrap_or(f64::INFINITY),
        });
    }
    let lambda = params.lambda;
    let (mut lo, mut hi) = match kind {
        ManifoldKind::Flat => return Ok(target),
        // √g ≥ 1, so Q(r) ≥ r
        ManifoldKind::Hyperbolic => (0.0, target),
        ManifoldKind::Interior => {
            let qc = critical_q(params, kind).unwrap_or(f64::INFINITY);
            if target >= qc {
                return Err(Error::Range {
                    value: target,
                    low: 0.0,
                    high: qc,
                });
            }
            // √g ≤ 1, so Q(r) ≤ r
            (target, params.critical_radius().unwrap_or(f64::INFINITY))
        }
        ManifoldKind::Exterior => {
            let rc = params.critical_radius().unwrap_or(f64::INFINITY);
            let mut hi = 2.0 * rc;
            while q_unchecked(lambda, hi, kind) < target {
                hi *= 2.0;
            }
            (rc, hi)
        }
    };
    if target == 0.0 {
        return Ok(lo);
    }
    // Safeguarded Newton: stop once the Newton correction is at rounding level,
    // so the error in r does not pick up the 1/√g amplification of a residual
    // test in Q.
    let mut r = target.clamp(lo, hi);
    for _ in 0..200 {
        let f = q_unchecked(lambda, r, kind) - target;
        if f == 0.0 {
            return Ok(r);
        }
        if f > 0.0 {
            hi = r;
        } else {
            lo = r;
        }
        let g = metric_factor_on(params, kind, r);
        let newton = if g > 0.0 { r - f / g.sqrt() } else { f64::NAN };
        let next = if newton >= lo && newton <= hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let settled = (next - r).abs() <= 2.0 * f64::EPSILON * r.abs().max(f64::MIN_POSITIVE)
            || hi - lo <= 4.0 * f64::EPSILON * hi.abs();
        r = next;
        if settled {
            return Ok(r);
        }
    }
    Ok(r)
}

fn check_c(c_n: f64) -> Result<()> {
    if c_n >= 0.0 && c_n.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!("c_N must be non-negative, got {c_n}")))
    }
}

/// `U_eff = (c_N/r² + ω² r²) / (2 g(r))`.
pub fn effective_potential(params: &Parameters, r: f64, c_n: f64, kind: ManifoldKind) -> Result<f64> {
    check_c(c_n)?;
    check_radial_domain(params, kind, r)?;
    let w2 = params.omega * params.omega;
    if r == 0.0 {
        if c_n > 0.0 {
            return Err(Error::Domain(
                "centrifugal term diverges at r = 0".into(),
            ));
        }
        return Ok(0.0);
    }
    let g = metric_factor_on(params, kind, r);
    Ok((c_n / (r * r) + w2 * r * r) / (2.0 * g))
}

/// `dU_eff/dr`, used to locate minima independently of the closed forms.
pub fn effective_potential_slope(params: &Parameters, r: f64, c_n: f64, kind: ManifoldKind) -> Result<f64> {
    check_c(c_n)?;
    check_radial_domain(params, kind, r)?;
    if r == 0.0 {
        return Err(Error::Domain("slope undefined at r = 0".into()));
    }
    let g = metric_factor_on(params, kind, r);
    let dg = 2.0 * kind.sign() * params.lambda * r;
    let w2 = params.omega * params.omega;
    let num = c_n / (r * r) + w2 * r * r;
    let dnum = -2.0 * c_n / (r * r * r) + 2.0 * w2 * r;
    Ok((dnum * g - num * dg) / (2.0 * g * g))
}

#[derive(Debug, Clone, Copy, PartialEq, DeriveSerialize)]
pub struct PotentialMinimum {
    pub r: f64,
    pub u: f64,
}

/// Closed-form minimum of `U_eff`:
///
/// ```text
///     r²_min = (λ c_N + √(λ² c_N² + ω² c_N)) / ω²
///     U_min  = -λ c_N + √(λ² c_N² + ω² c_N)
/// ```
///
/// valid for `λ > 0`, `λ = 0` and the interior `λ < 0`. The exterior
/// potential is monotone and has none. With `c_N = 0` the minimum is the
/// boundary point `r = 0`, `U = 0`.
pub fn potential_minimum(params: &Parameters, c_n: f64, kind: ManifoldKind) -> Result<Option<PotentialMinimum>> {
    check_c(c_n)?;
    if !kind.admits(params.lambda) {
        return Err(Error::Domain(format!(
            "manifold `{kind}` is incompatible with lambda = {}",
            params.lambda
        )));
    }
    if kind == ManifoldKind::Exterior {
        return Ok(None);
    }
    if !(params.omega > 0.0) {
        return Err(Error::Parameter("the minimum requires omega > 0".into()));
    }
    if c_n == 0.0 {
        return Ok(Some(PotentialMinimum { r: 0.0, u: 0.0 }));
    }
    let lambda = params.lambda;
    let w2 = params.omega * params.omega;
    let root = (lambda * lambda * c_n * c_n + w2 * c_n).sqrt();
    let r2 = (lambda * c_n + root) / w2;
    Ok(Some(PotentialMinimum {
        r: r2.sqrt(),
        u: root - lambda * c_n,
    }))
}

/// A boundary limit of `U_eff`: finite, or `+∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Limit {
    Finite(f64),
    PosInfinity,
}

impl Limit {
    pub fn value(self) -> f64 {
        match self {
            Limit::Finite(v) => v,
            Limit::PosInfinity => f64::INFINITY,
        }
    }
}

impl Serialize for Limit {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Limit::Finite(v) => serializer.serialize_f64(*v),
            Limit::PosInfinity => serializer.serialize_str("inf"),
        }
    }
}

/// Limits of `U_eff` at the lower and upper end of the radial interval.
pub fn potential_limits(params: &Parameters, c_n: f64, kind: ManifoldKind) -> Result<(Limit, Limit)> {
    check_c(c_n)?;
    if !kind.admits(params.lambda) {
        return Err(Error::Domain(format!(
            "manifold `{kind}` is incompatible with lambda = {}",
            params.lambda
        )));
    }
    let w2 = params.omega * params.omega;
    let at_origin = if c_n > 0.0 {
        Limit::PosInfinity
    } else {
        Limit::Finite(0.0)
    };
    let barrier = if c_n > 0.0 || w2 > 0.0 {
        Limit::PosInfinity
    } else {
        Limit::Finite(0.0)
    };
    Ok(match kind {
        ManifoldKind::Flat => (
            at_origin,
            if w2 > 0.0 {
                Limit::PosInfinity
            } else {
                Limit::Finite(0.0)
            },
        ),
        ManifoldKind::Hyperbolic => (at_origin, Limit::Finite(w2 / (2.0 * params.lambda))),
        ManifoldKind::Interior => (at_origin, barrier),
        ManifoldKind::Exterior => (barrier, Limit::Finite(w2 / (2.0 * params.lambda.abs()))),
    })
}

/// Summary of one effective potential, serialised as the JSON sidecar.
#[derive(Debug, Clone, PartialEq, DeriveSerialize)]
pub struct EffectivePotentialProfile {
    pub kind: ManifoldKind,
    pub r_min: Option<f64>,
    #[serde(rename = "U_min")]
    pub u_min: Option<f64>,
    pub r_c: Option<f64>,
    #[serde(rename = "Q_c")]
    pub q_c: Option<f64>,
    pub limits: (Limit, Limit),
}

pub fn potential_profile(params: &Parameters, c_n: f64, kind: ManifoldKind) -> Result<EffectivePotentialProfile> {
    let minimum = potential_minimum(params, c_n, kind)?;
    Ok(EffectivePotentialProfile {
        kind,
        r_min: minimum.map(|m| m.r),
        u_min: minimum.map(|m| m.u),
        r_c: params.critical_radius(),
        q_c: critical_q(params, kind),
        limits: potential_limits(params, c_n, kind)?,
    })
}
