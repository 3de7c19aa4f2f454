//! Time evolution under `H` in Cartesian phase space, with conservation
//! monitoring and orbit diagnostics.

mod diagnostics;
mod schemes;

use std::io::{self, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format_f64;
use crate::integrals::IntegralSet;
use crate::model::{check_radius_on, classify_manifold, evaluate_h_on, ManifoldKind, ManifoldType, Parameters, PhaseState};

pub use diagnostics::{orbit_diagnostics, orbit_diagnostics_with, DiagnosticsConfig, OrbitDiagnostics};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    ImplicitMidpoint,
    Gauss4,
    RkAdaptive,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::ImplicitMidpoint => "implicit_midpoint",
            Scheme::Gauss4 => "gauss4",
            Scheme::RkAdaptive => "rk_adaptive",
        }
    }

    pub fn is_symplectic(self) -> bool {
        !matches!(self, Scheme::RkAdaptive)
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "implicit_midpoint" | "midpoint" => Ok(Scheme::ImplicitMidpoint),
            "gauss4" | "gauss" => Ok(Scheme::Gauss4),
            "rk_adaptive" | "dopri5" | "rk45" => Ok(Scheme::RkAdaptive),
            other => Err(Error::Parameter(format!("unknown integration scheme `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegratorConfig {
    pub scheme: Scheme,
    /// Step for the fixed-step schemes, and the output spacing of the
    /// adaptive one.
    pub dt: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_fixed_point_iters: usize,
    pub fixed_point_tol: f64,
    /// Record every `output_stride`-th step.
    pub output_stride: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::Gauss4,
            dt: 1e-3,
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_fixed_point_iters: 50,
            fixed_point_tol: 1e-13,
            output_stride: 1,
        }
    }
}

impl IntegratorConfig {
    pub fn new(scheme: Scheme, dt: f64) -> Self {
        Self {
            scheme,
            dt,
            ..Self::default()
        }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.output_stride = stride;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("dt", self.dt),
            ("rel_tol", self.rel_tol),
            ("abs_tol", self.abs_tol),
            ("fixed_point_tol", self.fixed_point_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Parameter(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if self.max_fixed_point_iters == 0 {
            return Err(Error::Parameter("max_fixed_point_iters must be at least 1".into()));
        }
        if self.output_stride == 0 {
            return Err(Error::Parameter("output_stride must be at least 1".into()));
        }
        Ok(())
    }
}

/// Domain failures inside a step are reported as leaving the domain at `t`.
fn as_exit(err: Error, t: f64) -> Error {
    match err {
        Error::Domain(_) | Error::Singularity { .. } => Error::DomainExit { time: t },
        other => other,
    }
}

/// One-step map bound to a parameter set and a manifold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stepper {
    params: Parameters,
    kind: ManifoldKind,
    config: IntegratorConfig,
}

impl Stepper {
    pub fn new(params: Parameters, kind: ManifoldKind, config: IntegratorConfig) -> Result<Self> {
        let params = params.validated()?;
        config.validate()?;
        if !kind.admits(params.lambda) {
            return Err(Error::Domain(format!(
                "manifold `{kind}` is incompatible with lambda = {}",
                params.lambda
            )));
        }
        Ok(Self { params, kind, config })
    }

    /// Stepper on the manifold containing `state`. A state inside the guard
    /// band counts as having already left the domain.
    pub fn for_state(params: Parameters, state: &PhaseState, config: IntegratorConfig) -> Result<Self> {
        state.check_dim(&params)?;
        let kind = classify_manifold(&params, &state.q).map_err(|e| as_exit(e, 0.0))?.kind;
        Self::new(params, kind, config)
    }

    pub fn kind(&self) -> ManifoldKind {
        self.kind
    }

    pub fn config(&self) -> &IntegratorConfig {
        &self.config
    }

    /// Advance the flat state `y` from `t` to `t + h`.
    pub fn advance(&self, y: &[f64], h: f64, t: f64) -> Result<Vec<f64>> {
        let fp = schemes::FixedPoint {
            max_iters: self.config.max_fixed_point_iters,
            tol: self.config.fixed_point_tol,
        };
        let out = match self.config.scheme {
            Scheme::ImplicitMidpoint => schemes::implicit_midpoint(&self.params, self.kind, y, h, t, &fp),
            Scheme::Gauss4 => schemes::gauss4(&self.params, self.kind, y, h, t, &fp),
            Scheme::RkAdaptive => {
                let tol = schemes::Tolerances {
                    rel: self.config.rel_tol,
                    abs: self.config.abs_tol,
                };
                schemes::dopri_span(&self.params, self.kind, y, h, t, &tol)
            }
        }
        .map_err(|e| as_exit(e, t))?;
        if out.iter().any(|x| !x.is_finite()) {
            return Err(Error::DomainExit { time: t });
        }
        let n = out.len() / 2;
        let r = out[..n].iter().map(|x| x * x).sum::<f64>().sqrt();
        check_radius_on(&self.params, self.kind, r).map_err(|e| as_exit(e, t))?;
        Ok(out)
    }

    pub fn step(&self, state: &PhaseState, t: f64) -> Result<PhaseState> {
        state.check_dim(&self.params)?;
        let y = self.advance(&state.to_flat(), self.config.dt, t)?;
        Ok(PhaseState::from_flat(&y))
    }
}

/// A single step of size `config.dt` from `state`.
pub fn step(params: &Parameters, state: &PhaseState, config: &IntegratorConfig) -> Result<PhaseState> {
    Stepper::for_state(*params, state, *config)?.step(state, 0.0)
}

/// Largest relative drift `|F(t) - F(0)| / max(1, |F(0)|)` seen per integral.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftReport {
    pub labels: Vec<String>,
    pub max_relative: Vec<f64>,
}

impl DriftReport {
    pub fn max(&self) -> f64 {
        self.max_relative.iter().fold(0.0, |m: f64, x| m.max(*x))
    }

    pub fn get(&self, label: &str) -> Option<f64> {
        self.labels.iter().position(|l| l == label).map(|i| self.max_relative[i])
    }

    /// Label and value of the worst integral.
    pub fn worst(&self) -> Option<(&str, f64)> {
        self.labels
            .iter()
            .zip(&self.max_relative)
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(l, v)| (l.as_str(), *v))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<PhaseState>,
    pub params: Parameters,
    pub manifold: ManifoldType,
    pub config: IntegratorConfig,
    /// `H` at each sample.
    pub energies: Vec<f64>,
    /// Largest relative drift over all integrals at each sample.
    pub drift_max: Vec<f64>,
    pub drift_report: DriftReport,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> &PhaseState {
        self.states.last().expect("a trajectory holds at least its initial state")
    }

    pub fn csv_header(&self) -> String {
        let n = self.params.n_dim;
        let mut cols = vec!["t".to_string()];
        cols.extend((1..=n).map(|i| format!("q{i}")));
        cols.extend((1..=n).map(|i| format!("p{i}")));
        cols.push("H".into());
        cols.push("drift_max".into());
        cols.join(",")
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{}", self.csv_header())?;
        for (k, s) in self.states.iter().enumerate() {
            let mut row = Vec::with_capacity(2 * s.dim() + 3);
            row.push(format_f64(self.times[k]));
            row.extend(s.q.iter().chain(&s.p).map(|x| format_f64(*x)));
            row.push(format_f64(self.energies[k]));
            row.push(format_f64(self.drift_max[k]));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

struct DriftMonitor {
    initial: Vec<f64>,
    max_relative: Vec<f64>,
}

impl DriftMonitor {
    fn new(initial: Vec<f64>) -> Self {
        let n = initial.len();
        Self {
            initial,
            max_relative: vec![0.0; n],
        }
    }

    /// Records one sample and returns its largest relative drift.
    fn record(&mut self, values: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, (v, v0)) in values.iter().zip(&self.initial).enumerate() {
            let d = (v - v0).abs() / v0.abs().max(1.0);
            self.max_relative[i] = self.max_relative[i].max(d);
            worst = worst.max(d);
        }
        worst
    }
}

/// Integrates from `t = 0` to `t_end`, recording every `output_stride`-th step
/// and always the final one. The last step is shortened to land on `t_end`.
pub fn integrate(params: &Parameters, state0: &PhaseState, t_end: f64, config: &IntegratorConfig) -> Result<Trajectory> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::Parameter(format!("t_end must be positive, got {t_end}")));
    }
    let stepper = Stepper::for_state(*params, state0, *config)?;
    let params = stepper.params;
    let kind = stepper.kind;
    let manifold = ManifoldType {
        kind,
        r_c: params.critical_radius(),
    };
    let dt = config.dt;
    let n_steps = ((t_end / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize;

    let integrals = |s: &PhaseState| IntegralSet::evaluate_on(&params, kind, s).map(|set| set.values());
    let v0 = integrals(state0)?;
    let mut monitor = DriftMonitor::new(v0);

    let mut times = vec![0.0];
    let mut states = vec![state0.clone()];
    let mut energies = vec![evaluate_h_on(&params, kind, state0)?];
    let mut drift_max = vec![0.0];

    let mut y = state0.to_flat();
    let mut t = 0.0;
    for k in 1..=n_steps {
        let t_next = if k == n_steps { t_end } else { k as f64 * dt };
        y = stepper.advance(&y, t_next - t, t)?;
        t = t_next;
        if k % config.output_stride == 0 || k == n_steps {
            let s = PhaseState::from_flat(&y);
            let values = integrals(&s).map_err(|e| as_exit(e, t))?;
            drift_max.push(monitor.record(&values));
            energies.push(values[0]);
            times.push(t);
            states.push(s);
        }
    }

    Ok(Trajectory {
        times,
        states,
        params,
        manifold,
        config: *config,
        energies,
        drift_max,
        drift_report: DriftReport {
            labels: IntegralSet::labels(params.n_dim),
            max_relative: monitor.max_relative,
        },
    })
}
