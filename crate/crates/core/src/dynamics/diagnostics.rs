//! Radial period, angular advance and closure of bound orbits.
//!
//! Pericenters are the upward zero crossings of `q·p`, which has the sign of
//! `dr/dt`. Crossings are refined on the cubic Hermite interpolant of `q·p`
//! built from the samples and the vector field, so the period estimate does
//! not depend on the output stride beyond interpolation error.

use super::schemes::vector_field;
use super::Trajectory;
use crate::error::{Error, Result};
use crate::model::{dot, ManifoldKind, Parameters, PhaseState};
use crate::radial::{effective_potential_slope, potential_minimum, radial_reduction};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsConfig {
    /// Largest multiple of the radial period searched for closure.
    pub k_max: usize,
    /// Pericenter passages required before the orbit counts as bound.
    pub min_pericenters: usize,
    /// Relative radial amplitude below which an orbit is treated as circular.
    pub circular_tol: f64,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            k_max: 64,
            min_pericenters: 3,
            circular_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrbitDiagnostics {
    pub radial_period: f64,
    /// Advance of the polar angle in the initial orbital plane per radial period.
    pub angular_advance: f64,
    /// Smallest phase-space distance `|y(t0 + k T_r) - y(t0)|` over `1 ≤ k ≤ k_max`;
    /// `+∞` when not even one period fits in the trajectory.
    pub closure_residual: f64,
    /// The `k` attaining `closure_residual`, or 0 when none was tested.
    pub closure_k: usize,
    pub pericenter_times: Vec<f64>,
    /// Whether the period came from the small-oscillation frequency of a
    /// circular orbit.
    pub circular: bool,
}

/// Dense interpolation of a trajectory by cubic Hermite segments.
struct Dense<'a> {
    traj: &'a Trajectory,
    ys: Vec<Vec<f64>>,
    fs: Vec<Vec<f64>>,
}

impl<'a> Dense<'a> {
    fn new(traj: &'a Trajectory) -> Result<Self> {
        let kind = traj.manifold.kind;
        let ys: Vec<Vec<f64>> = traj.states.iter().map(PhaseState::to_flat).collect();
        let fs = ys
            .iter()
            .map(|y| {
                let mut f = vec![0.0; y.len()];
                vector_field(&traj.params, kind, y, &mut f).map(|_| f)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { traj, ys, fs })
    }

    fn segment(&self, t: f64) -> usize {
        let times = &self.traj.times;
        match times.binary_search_by(|x| x.total_cmp(&t)) {
            Ok(i) => i.min(times.len() - 2),
            Err(i) => i.saturating_sub(1).min(times.len() - 2),
        }
    }

    fn at(&self, t: f64) -> Vec<f64> {
        let i = self.segment(t);
        let (t0, t1) = (self.traj.times[i], self.traj.times[i + 1]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        (0..self.ys[i].len())
            .map(|d| {
                h00 * self.ys[i][d] + h10 * h * self.fs[i][d] + h01 * self.ys[i + 1][d] + h11 * h * self.fs[i + 1][d]
            })
            .collect()
    }

    /// `q·p` and its time derivative at sample `i`.
    fn radial_product(&self, i: usize) -> (f64, f64) {
        let y = &self.ys[i];
        let f = &self.fs[i];
        let n = y.len() / 2;
        let (q, p) = y.split_at(n);
        let (dq, dp) = f.split_at(n);
        (dot(q, p), dot(dq, p) + dot(q, dp))
    }

    /// Root of the Hermite cubic for `q·p` on segment `i`, where it changes
    /// sign from negative to non-negative.
    fn crossing(&self, i: usize) -> f64 {
        let (t0, t1) = (self.traj.times[i], self.traj.times[i + 1]);
        let h = t1 - t0;
        let (s0, d0) = self.radial_product(i);
        let (s1, d1) = self.radial_product(i + 1);
        let cubic = |x: f64| {
            let h00 = (1.0 + 2.0 * x) * (1.0 - x) * (1.0 - x);
            let h10 = x * (1.0 - x) * (1.0 - x);
            let h01 = x * x * (3.0 - 2.0 * x);
            let h11 = x * x * (x - 1.0);
            h00 * s0 + h10 * h * d0 + h01 * s1 + h11 * h * d1
        };
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if cubic(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-15 {
                break;
            }
        }
        t0 + 0.5 * (lo + hi) * h
    }
}

/// Orthonormal basis of the plane spanned by `q0` and `p0`, or `None` for
/// purely radial motion.
fn orbital_plane(state: &PhaseState) -> Option<(Vec<f64>, Vec<f64>)> {
    let r = state.radius();
    if r == 0.0 {
        return None;
    }
    let e1: Vec<f64> = state.q.iter().map(|x| x / r).collect();
    let along = dot(&state.p, &e1);
    let mut e2: Vec<f64> = state.p.iter().zip(&e1).map(|(p, e)| p - along * e).collect();
    let norm = dot(&e2, &e2).sqrt();
    if norm <= 1e-12 * state.p_squared().sqrt().max(1e-300) {
        return None;
    }
    e2.iter_mut().for_each(|x| *x /= norm);
    Some((e1, e2))
}

/// Unwrapped polar angles of the samples in the plane `(e1, e2)`.
fn unwrapped_angles(traj: &Trajectory, e1: &[f64], e2: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(traj.len());
    let mut prev = 0.0f64;
    for (k, s) in traj.states.iter().enumerate() {
        let raw = dot(&s.q, e2).atan2(dot(&s.q, e1));
        let v = if k == 0 { raw } else { prev + wrap(raw - prev) };
        out.push(v);
        prev = v;
    }
    out
}

fn angle_at(dense: &Dense<'_>, angles: &[f64], t: f64, e1: &[f64], e2: &[f64]) -> f64 {
    let i = dense.segment(t);
    let y = dense.at(t);
    let n = y.len() / 2;
    let raw = dot(&y[..n], e2).atan2(dot(&y[..n], e1));
    angles[i] + wrap(raw - angles[i])
}

/// Reduces an angle difference to `[-π, π)`.
fn wrap(d: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    (d + PI).rem_euclid(TAU) - PI
}

/// Radial period of small oscillations about the circular orbit of `state`,
/// `2π / √(U''(r_min) / g(r_min))`.
fn circular_period(params: &Parameters, kind: ManifoldKind, state: &PhaseState) -> Result<f64> {
    let c_n = radial_reduction(state)?.c_n;
    let min = potential_minimum(params, c_n, kind)?
        .filter(|m| m.r > 0.0)
        .ok_or_else(|| Error::UnboundOrbit("no circular orbit for this angular momentum".into()))?;
    let h = 1e-4 * min.r;
    let d2 = (effective_potential_slope(params, min.r + h, c_n, kind)?
        - effective_potential_slope(params, min.r - h, c_n, kind)?)
        / (2.0 * h);
    let g = kind.sign() * (1.0 + params.lambda * min.r * min.r);
    if !(d2 > 0.0) {
        return Err(Error::UnboundOrbit("effective potential is not convex at r_min".into()));
    }
    Ok(std::f64::consts::TAU / (d2 / g).sqrt())
}

pub fn orbit_diagnostics(traj: &Trajectory) -> Result<OrbitDiagnostics> {
    orbit_diagnostics_with(traj, &DiagnosticsConfig::default())
}

pub fn orbit_diagnostics_with(traj: &Trajectory, config: &DiagnosticsConfig) -> Result<OrbitDiagnostics> {
    if traj.len() < 3 {
        return Err(Error::UnboundOrbit("trajectory has fewer than three samples".into()));
    }
    let dense = Dense::new(traj)?;
    let t_start = traj.times[0];
    let t_end = *traj.times.last().unwrap();

    let radii: Vec<f64> = traj.states.iter().map(PhaseState::radius).collect();
    let r_max = radii.iter().cloned().fold(f64::MIN, f64::max);
    let r_min = radii.iter().cloned().fold(f64::MAX, f64::min);
    let circular = r_max > 0.0 && (r_max - r_min) <= config.circular_tol * r_max;

    let pericenters: Vec<f64> = if circular {
        Vec::new()
    } else {
        (0..traj.len() - 1)
            .filter(|&i| dense.radial_product(i).0 < 0.0 && dense.radial_product(i + 1).0 >= 0.0)
            .map(|i| dense.crossing(i))
            .collect()
    };

    let plane = orbital_plane(&traj.states[0]);
    let angles = plane.as_ref().map(|(e1, e2)| unwrapped_angles(traj, e1, e2));

    let (radial_period, angular_advance) = if circular {
        let period = circular_period(&traj.params, traj.manifold.kind, &traj.states[0])?;
        let rate = match (&plane, &angles) {
            (Some(_), Some(a)) => (a[a.len() - 1] - a[0]) / (t_end - t_start),
            _ => 0.0,
        };
        (period, rate * period)
    } else {
        if pericenters.len() < config.min_pericenters {
            return Err(Error::UnboundOrbit(format!(
                "found {} pericenter passages, need {}",
                pericenters.len(),
                config.min_pericenters
            )));
        }
        let count = (pericenters.len() - 1) as f64;
        let first = pericenters[0];
        let last = *pericenters.last().unwrap();
        let period = (last - first) / count;
        let advance = match (&plane, &angles) {
            (Some((e1, e2)), Some(a)) => {
                (angle_at(&dense, a, last, e1, e2) - angle_at(&dense, a, first, e1, e2)) / count
            }
            _ => 0.0,
        };
        (period, advance)
    };

    let y0 = &dense.ys[0];
    let mut closure_residual = f64::INFINITY;
    let mut closure_k = 0;
    for k in 1..=config.k_max {
        let t = t_start + k as f64 * radial_period;
        if t > t_end {
            break;
        }
        let y = dense.at(t);
        let d = y.iter().zip(y0).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        if d < closure_residual {
            closure_residual = d;
            closure_k = k;
        }
    }

    Ok(OrbitDiagnostics {
        radial_period,
        angular_advance,
        closure_residual,
        closure_k,
        pericenter_times: pericenters,
        circular,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{integrate, IntegratorConfig, Scheme};
    use std::f64::consts::PI;

    #[test]
    fn harmonic_ellipse() {
        let p = Parameters::new(0.0, 1.0, 2).unwrap();
        let s0 = PhaseState::new(vec![1.0, 0.0], vec![0.0, 0.5]).unwrap();
        let traj = integrate(&p, &s0, 30.0, &IntegratorConfig::new(Scheme::Gauss4, 1e-2)).unwrap();
        let d = orbit_diagnostics(&traj).unwrap();
        assert!((d.radial_period - PI).abs() < 1e-8, "{}", d.radial_period);
        assert!((d.angular_advance - PI).abs() < 1e-8, "{}", d.angular_advance);
        // a centered ellipse returns to the same phase point after every
        // second pericenter passage
        assert_eq!(d.closure_k % 2, 0);
        assert!(d.closure_residual < 1e-8);
    }

    #[test]
    fn radial_motion_is_unbound_free() {
        let p = Parameters::new(0.0, 1.0, 2).unwrap();
        let s0 = PhaseState::new(vec![1.0, 0.0], vec![0.0, 0.0]).unwrap();
        let traj = integrate(&p, &s0, 0.5, &IntegratorConfig::new(Scheme::Gauss4, 1e-2)).unwrap();
        assert!(matches!(orbit_diagnostics(&traj), Err(Error::UnboundOrbit(_))));
    }
}
