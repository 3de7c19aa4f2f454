//! One-step maps for Hamilton's equations `q' = ∂H/∂p`, `p' = -∂H/∂q`.
//!
//! The kinetic factor couples `q` and `p`, so the splitting behind explicit
//! leapfrog is unavailable. The symplectic options are the implicit midpoint
//! rule and the two-stage Gauss–Legendre collocation method, both solved by
//! fixed-point iteration. Dormand–Prince 5(4) is the non-symplectic fallback.

use crate::error::{Error, Result};
use crate::model::{check_radius_on, dot, metric_factor_on, ManifoldKind, Parameters};

/// Hamiltonian vector field at the flat state `y = (q, p)`; mirrors
/// [`crate::model::gradient_h_on`] without allocating.
pub(crate) fn vector_field(params: &Parameters, kind: ManifoldKind, y: &[f64], out: &mut [f64]) -> Result<()> {
    let n = y.len() / 2;
    let (q, p) = y.split_at(n);
    let q2 = dot(q, q);
    let r = q2.sqrt();
    check_radius_on(params, kind, r)?;
    let g = metric_factor_on(params, kind, r);
    if !(g > 0.0) {
        return Err(Error::Domain(format!("metric factor {g} is not positive")));
    }
    let w2 = params.omega * params.omega;
    let a = dot(p, p) + w2 * q2;
    let radial = (w2 * g - kind.sign() * params.lambda * a) / (g * g);
    for i in 0..n {
        out[i] = p[i] / g;
        out[n + i] = -q[i] * radial;
    }
    Ok(())
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

pub(crate) struct FixedPoint {
    pub max_iters: usize,
    pub tol: f64,
}

/// `y1 = y0 + h f((y0 + y1)/2)`, iterating on the midpoint.
pub(crate) fn implicit_midpoint(
    params: &Parameters,
    kind: ManifoldKind,
    y0: &[f64],
    h: f64,
    t: f64,
    fp: &FixedPoint,
) -> Result<Vec<f64>> {
    let dim = y0.len();
    let mut k = vec![0.0; dim];
    vector_field(params, kind, y0, &mut k)?;
    let mut mid: Vec<f64> = y0.iter().zip(&k).map(|(y, f)| y + 0.5 * h * f).collect();
    let scale = 1.0 + max_abs(y0);
    let mut residual = f64::INFINITY;
    for _ in 0..fp.max_iters {
        vector_field(params, kind, &mid, &mut k)?;
        residual = 0.0;
        for i in 0..dim {
            let next = y0[i] + 0.5 * h * k[i];
            residual = residual.max((next - mid[i]).abs());
            mid[i] = next;
        }
        if residual <= fp.tol * scale {
            return Ok(mid.iter().zip(y0).map(|(m, y)| 2.0 * m - y).collect());
        }
    }
    Err(Error::Convergence {
        time: t,
        iterations: fp.max_iters,
        residual,
    })
}

/// Two-stage Gauss–Legendre collocation (order 4).
pub(crate) fn gauss4(
    params: &Parameters,
    kind: ManifoldKind,
    y0: &[f64],
    h: f64,
    t: f64,
    fp: &FixedPoint,
) -> Result<Vec<f64>> {
    let s3 = 3f64.sqrt();
    let a = [[0.25, 0.25 - s3 / 6.0], [0.25 + s3 / 6.0, 0.25]];
    let dim = y0.len();
    let mut f0 = vec![0.0; dim];
    vector_field(params, kind, y0, &mut f0)?;
    // stage increments Z_i = h Σ_j a_ij f(y0 + Z_j)
    let mut z = [vec![0.0; dim], vec![0.0; dim]];
    for (i, zi) in z.iter_mut().enumerate() {
        let c = a[i][0] + a[i][1];
        for d in 0..dim {
            zi[d] = h * c * f0[d];
        }
    }
    let mut f = [vec![0.0; dim], vec![0.0; dim]];
    let mut stage = vec![0.0; dim];
    let scale = 1.0 + max_abs(y0);
    let mut residual = f64::INFINITY;
    for _ in 0..fp.max_iters {
        for i in 0..2 {
            for d in 0..dim {
                stage[d] = y0[d] + z[i][d];
            }
            vector_field(params, kind, &stage, &mut f[i])?;
        }
        residual = 0.0;
        for (i, zi) in z.iter_mut().enumerate() {
            for d in 0..dim {
                let next = h * (a[i][0] * f[0][d] + a[i][1] * f[1][d]);
                residual = residual.max((next - zi[d]).abs());
                zi[d] = next;
            }
        }
        if residual <= fp.tol * scale {
            for i in 0..2 {
                for d in 0..dim {
                    stage[d] = y0[d] + z[i][d];
                }
                vector_field(params, kind, &stage, &mut f[i])?;
            }
            return Ok((0..dim)
                .map(|d| y0[d] + 0.5 * h * (f[0][d] + f[1][d]))
                .collect());
        }
    }
    Err(Error::Convergence {
        time: t,
        iterations: fp.max_iters,
        residual,
    })
}

const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

pub(crate) struct Tolerances {
    pub rel: f64,
    pub abs: f64,
}

/// One Dormand–Prince attempt. Returns the fifth-order solution and the
/// scaled RMS error estimate, or `None` when a stage leaves the domain.
fn dopri_attempt(
    params: &Parameters,
    kind: ManifoldKind,
    y0: &[f64],
    h: f64,
    tol: &Tolerances,
) -> Option<(Vec<f64>, f64)> {
    let dim = y0.len();
    let mut k = vec![vec![0.0; dim]; 7];
    let mut stage = vec![0.0; dim];
    for s in 0..7 {
        for d in 0..dim {
            stage[d] = y0[d] + h * (0..s).map(|j| DP_A[s][j] * k[j][d]).sum::<f64>();
        }
        vector_field(params, kind, &stage, &mut k[s]).ok()?;
    }
    // the last stage point is the fifth-order solution (FSAL)
    let y1 = stage;
    let mut sum = 0.0;
    for d in 0..dim {
        let err = h * (0..7).map(|j| DP_E[j] * k[j][d]).sum::<f64>();
        let sc = tol.abs + tol.rel * y0[d].abs().max(y1[d].abs());
        sum += (err / sc).powi(2);
    }
    Some((y1, (sum / dim as f64).sqrt()))
}

/// Adaptive Dormand–Prince 5(4) across `[t, t + span]`.
pub(crate) fn dopri_span(
    params: &Parameters,
    kind: ManifoldKind,
    y0: &[f64],
    span: f64,
    t: f64,
    tol: &Tolerances,
) -> Result<Vec<f64>> {
    let mut y = y0.to_vec();
    let mut done = 0.0;
    let mut h = span;
    let h_min = 1e-14 * (1.0 + t.abs() + span);
    while done < span {
        h = h.min(span - done);
        match dopri_attempt(params, kind, &y, h, tol) {
            Some((y1, err)) if err <= 1.0 => {
                y = y1;
                done += h;
                let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                h *= factor;
            }
            Some((_, err)) => {
                h *= (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
            }
            None => h *= 0.25,
        }
        if h < h_min {
            return Err(Error::DomainExit { time: t + done });
        }
    }
    Ok(y)
}
