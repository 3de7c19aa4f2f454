use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Args;
use lambda_oscillator::dynamics::{integrate, IntegratorConfig, Scheme};
use lambda_oscillator::integrals::{
    ascending_chain, descending_chain, fradkin_diagonal, independence_rank, independent_set, max_pairwise_bracket,
    poisson_bracket, AngularBlock, BlockOrder, FradkinComponent, GenericSampler, Hamiltonian, PhaseFunction,
};
use lambda_oscillator::model::{classify_radius, curvature_extrema, scalar_curvature_on, ManifoldKind};
use lambda_oscillator::quantum::{asymptote, spectrum as levels, SpectrumRequest};
use lambda_oscillator::radial::{canonical_q, effective_potential, potential_profile};
use lambda_oscillator::staeckel::{build_paper_instance, transport_residual};
use lambda_oscillator::{format_f64, Error, Parameters, PhaseState};
use serde::Serialize;

use crate::config::{FileConfig, Format};
use crate::table::{emit_table, sink, Table};
use crate::{Common, Failure};

const BRACKET_TOL: f64 = 1e-9;
const IDENTITY_TOL: f64 = 1e-12;

/// Common options merged with the optional config file.
struct Resolved {
    file: FileConfig,
    lambda: Option<f64>,
    omega: f64,
    n_dim: Option<usize>,
    hbar: f64,
    seed: u64,
    out: Option<PathBuf>,
    format: Format,
}

impl Resolved {
    fn new(common: &Common) -> Result<Self, Failure> {
        let file = FileConfig::load(common.config.as_deref())?;
        Ok(Self {
            lambda: common.lambda.or(file.lambda),
            omega: common.omega.or(file.omega).unwrap_or(1.0),
            n_dim: common.n_dim.or(file.n_dim),
            hbar: common.hbar.or(file.hbar).unwrap_or(1.0),
            seed: common.seed.or(file.seed).unwrap_or(42),
            out: common.out.clone().or_else(|| file.out.clone()),
            format: common.format.or(file.format).unwrap_or(Format::Csv),
            file,
        })
    }

    fn lambda(&self) -> Result<f64, Failure> {
        self.lambda.ok_or_else(|| Failure::config("missing --lambda"))
    }

    fn params(&self, default_n: usize) -> Result<Parameters, Failure> {
        let p = Parameters::new(self.lambda()?, self.omega, self.n_dim.unwrap_or(default_n))?.with_hbar(self.hbar)?;
        Ok(p)
    }

    fn out(&self) -> Option<&Path> {
        self.out.as_deref()
    }
}

fn default_kind(lambda: f64) -> ManifoldKind {
    if lambda > 0.0 {
        ManifoldKind::Hyperbolic
    } else if lambda < 0.0 {
        ManifoldKind::Interior
    } else {
        ManifoldKind::Flat
    }
}

fn parse_kind(flag: Option<&str>, file: Option<&str>, lambda: f64) -> Result<ManifoldKind, Failure> {
    let kind = match flag.or(file) {
        Some(s) => s.parse::<ManifoldKind>()?,
        None => default_kind(lambda),
    };
    if !kind.admits(lambda) {
        return Err(Failure::config(format!("manifold `{kind}` is incompatible with lambda = {lambda}")));
    }
    Ok(kind)
}

fn format_vec(v: &[f64]) -> String {
    v.iter().map(|x| format_f64(*x)).collect::<Vec<_>>().join(",")
}

// ---------------------------------------------------------------- simulate

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    /// Initial position, comma separated
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    q0: Option<Vec<f64>>,
    /// Initial momentum, comma separated
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    p0: Option<Vec<f64>>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    /// implicit_midpoint, gauss4 or rk_adaptive
    #[arg(long)]
    scheme: Option<String>,
    /// Record every n-th step
    #[arg(long)]
    stride: Option<usize>,
    #[arg(long)]
    rel_tol: Option<f64>,
    #[arg(long)]
    abs_tol: Option<f64>,
}

pub fn simulate(args: SimulateArgs) -> Result<(), Failure> {
    let r = Resolved::new(&args.common)?;
    let q0 = args.q0.or_else(|| r.file.q0.clone()).ok_or_else(|| Failure::config("missing --q0"))?;
    let p0 = args
        .p0
        .or_else(|| r.file.p0.clone())
        .unwrap_or_else(|| vec![0.0; q0.len()]);
    let state = PhaseState::new(q0, p0)?;
    let params = r.params(state.dim())?;
    let t_end = args.t_end.or(r.file.t_end).unwrap_or(10.0);

    let mut cfg = r.file.integrator.unwrap_or_default();
    if let Some(s) = args.scheme {
        cfg.scheme = s.parse::<Scheme>()?;
    }
    cfg.dt = args.dt.unwrap_or(cfg.dt);
    cfg.output_stride = args.stride.unwrap_or(cfg.output_stride);
    cfg.rel_tol = args.rel_tol.unwrap_or(cfg.rel_tol);
    cfg.abs_tol = args.abs_tol.unwrap_or(cfg.abs_tol);
    cfg.validate()?;

    let traj = integrate(&params, &state, t_end, &cfg)?;

    let mut w = sink(r.out())?;
    match r.format {
        Format::Csv => traj.write_csv(&mut w)?,
        Format::Json => {
            #[derive(Serialize)]
            struct Dump<'a> {
                params: &'a Parameters,
                manifold: &'a lambda_oscillator::ManifoldType,
                config: &'a IntegratorConfig,
                times: &'a [f64],
                states: &'a [PhaseState],
                energies: &'a [f64],
                drift_max: &'a [f64],
                drift_report: &'a lambda_oscillator::dynamics::DriftReport,
            }
            let dump = Dump {
                params: &traj.params,
                manifold: &traj.manifold,
                config: &traj.config,
                times: &traj.times,
                states: &traj.states,
                energies: &traj.energies,
                drift_max: &traj.drift_max,
                drift_report: &traj.drift_report,
            };
            serde_json::to_writer(&mut w, &dump).map_err(std::io::Error::from)?;
            writeln!(w)?;
        }
    }
    w.flush()?;
    drop(w);

    // keep standard output clean for the data when no file is given
    let mut summary: Box<dyn Write> = if r.out.is_some() {
        Box::new(std::io::stdout().lock())
    } else {
        Box::new(std::io::stderr().lock())
    };
    writeln!(summary, "manifold {}", traj.manifold.kind)?;
    writeln!(summary, "samples {}", traj.len())?;
    writeln!(summary, "final_state {}", format_vec(&traj.final_state().to_flat()))?;
    for (label, v) in traj.drift_report.labels.iter().zip(&traj.drift_report.max_relative) {
        writeln!(summary, "drift {label} {}", format_f64(*v))?;
    }
    writeln!(summary, "drift_max {}", format_f64(traj.drift_report.max()))?;
    Ok(())
}

// ------------------------------------------------------------------ verify

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    samples: Option<usize>,
    /// flat, hyperbolic, interior or exterior (default from the sign of λ)
    #[arg(long)]
    kind: Option<String>,
}

#[derive(Debug, Default, Serialize)]
struct Worst {
    value: f64,
    sample: usize,
}

impl Worst {
    fn update(&mut self, value: f64, sample: usize) {
        if value > self.value {
            *self = Worst { value, sample };
        }
    }
}

#[derive(Debug, Serialize)]
struct VerifyReport {
    kind: ManifoldKind,
    n_dim: usize,
    samples: usize,
    seed: u64,
    bracket_upper_blocks: Worst,
    bracket_lower_blocks: Worst,
    bracket_fradkin: Worst,
    involution_ascending: Worst,
    involution_descending: Worst,
    involution_fradkin_diagonal: Worst,
    rank_min: usize,
    rank_max: usize,
    rank_expected: usize,
    tolerance: f64,
    passed: bool,
}

pub fn verify(args: VerifyArgs) -> Result<(), Failure> {
    let r = Resolved::new(&args.common)?;
    let params = r.params(3)?;
    let n = params.n_dim;
    let kind = parse_kind(args.kind.as_deref(), r.file.kind.as_deref(), params.lambda)?;
    let samples = args.samples.or(r.file.samples).unwrap_or(100);
    if samples == 0 {
        return Err(Failure::config("--samples must be at least 1"));
    }

    let h = Hamiltonian::on(params, kind);
    let upper: Vec<AngularBlock> = (2..=n)
        .map(|m| AngularBlock::new(n, m, BlockOrder::Ascending))
        .collect::<Result<_, _>>()?;
    let lower: Vec<AngularBlock> = (2..=n)
        .map(|m| AngularBlock::new(n, m, BlockOrder::Descending))
        .collect::<Result<_, _>>()?;
    let fradkin: Vec<FradkinComponent> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| FradkinComponent::new(params, i, j))
        .collect();
    let sets = [ascending_chain(&params), descending_chain(&params), fradkin_diagonal(&params)];
    let rank_set = independent_set(&params, 0);
    let rank_refs: Vec<&dyn PhaseFunction> = rank_set.iter().map(|f| f.as_ref()).collect();

    let mut report = VerifyReport {
        kind,
        n_dim: n,
        samples,
        seed: r.seed,
        bracket_upper_blocks: Worst::default(),
        bracket_lower_blocks: Worst::default(),
        bracket_fradkin: Worst::default(),
        involution_ascending: Worst::default(),
        involution_descending: Worst::default(),
        involution_fradkin_diagonal: Worst::default(),
        rank_min: usize::MAX,
        rank_max: 0,
        rank_expected: 2 * n - 1,
        tolerance: BRACKET_TOL,
        passed: false,
    };
    let mut rank_failure = None;
    let states = GenericSampler::new(params, kind, r.seed)?.samples(samples);
    for (k, s) in states.iter().enumerate() {
        let max_over = |fs: &[&dyn PhaseFunction]| -> Result<f64, Error> {
            fs.iter()
                .map(|f| poisson_bracket(&h, *f, s).map(f64::abs))
                .try_fold(0.0f64, |m, v| v.map(|v| m.max(v)))
        };
        let up: Vec<&dyn PhaseFunction> = upper.iter().map(|f| f as &dyn PhaseFunction).collect();
        let lo: Vec<&dyn PhaseFunction> = lower.iter().map(|f| f as &dyn PhaseFunction).collect();
        let fr: Vec<&dyn PhaseFunction> = fradkin.iter().map(|f| f as &dyn PhaseFunction).collect();
        report.bracket_upper_blocks.update(max_over(&up)?, k);
        report.bracket_lower_blocks.update(max_over(&lo)?, k);
        report.bracket_fradkin.update(max_over(&fr)?, k);
        report.involution_ascending.update(max_pairwise_bracket(&sets[0], s)?, k);
        report.involution_descending.update(max_pairwise_bracket(&sets[1], s)?, k);
        report.involution_fradkin_diagonal.update(max_pairwise_bracket(&sets[2], s)?, k);
        let rank = independence_rank(&rank_refs, s)?.rank;
        report.rank_min = report.rank_min.min(rank);
        report.rank_max = report.rank_max.max(rank);
        if rank != report.rank_expected && rank_failure.is_none() {
            rank_failure = Some(k);
        }
    }
    let worst = [
        &report.bracket_upper_blocks,
        &report.bracket_lower_blocks,
        &report.bracket_fradkin,
        &report.involution_ascending,
        &report.involution_descending,
        &report.involution_fradkin_diagonal,
    ]
    .into_iter()
    .max_by(|a, b| a.value.total_cmp(&b.value))
    .map(|w| (w.value, w.sample))
    .unwrap_or((0.0, 0));
    report.passed = worst.0 <= BRACKET_TOL && rank_failure.is_none();

    let mut w = sink(r.out())?;
    match r.format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut w, &report).map_err(std::io::Error::from)?;
            writeln!(w)?;
        }
        Format::Csv => {
            writeln!(w, "kind {}", report.kind)?;
            writeln!(w, "samples {}", report.samples)?;
            for (name, v) in [
                ("bracket H C^(m)", &report.bracket_upper_blocks),
                ("bracket H C_(m)", &report.bracket_lower_blocks),
                ("bracket H I_ij", &report.bracket_fradkin),
                ("involution ascending", &report.involution_ascending),
                ("involution descending", &report.involution_descending),
                ("involution fradkin_diagonal", &report.involution_fradkin_diagonal),
            ] {
                writeln!(w, "{name} {}", format_f64(v.value))?;
            }
            writeln!(w, "rank {} (expected {})", report.rank_min, report.rank_expected)?;
            writeln!(w, "status {}", if report.passed { "ok" } else { "FAILED" })?;
        }
    }
    w.flush()?;
    if report.passed {
        return Ok(());
    }
    let k = rank_failure.filter(|_| worst.0 <= BRACKET_TOL).unwrap_or(worst.1);
    Err(Failure::numeric(format!(
        "tolerance violated; worst sample #{k}: q=[{}] p=[{}]",
        format_vec(&states[k].q),
        format_vec(&states[k].p)
    )))
}

// ------------------------------------------------------- effective-potential

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Preset {
    Fig1Hyperbolic,
    Fig1Spherical,
    Fig1Flat,
    Fig2Exterior,
}

impl Preset {
    fn parse(s: &str) -> Result<Self, Failure> {
        <Self as clap::ValueEnum>::from_str(s, true).map_err(|_| Failure::config(format!("unknown preset `{s}`")))
    }

    fn lambda_and_kind(self) -> (f64, ManifoldKind) {
        match self {
            Preset::Fig1Hyperbolic => (0.02, ManifoldKind::Hyperbolic),
            Preset::Fig1Spherical => (-0.02, ManifoldKind::Interior),
            Preset::Fig1Flat => (0.0, ManifoldKind::Flat),
            Preset::Fig2Exterior => (-0.02, ManifoldKind::Exterior),
        }
    }
}

#[derive(Debug, Args)]
pub struct PotentialArgs {
    #[command(flatten)]
    common: Common,
    /// Figure parameters: λ = ±0.02 or 0, c_N = 100, ω = 1
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// Angular-momentum constant c_N
    #[arg(long)]
    c_n: Option<f64>,
    #[arg(long)]
    kind: Option<String>,
    #[arg(long)]
    r_start: Option<f64>,
    #[arg(long)]
    r_end: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    /// Path of the JSON summary; defaults to the output path with a .json
    /// extension, or standard error without --out
    #[arg(long)]
    sidecar: Option<PathBuf>,
}

/// Default grid for each manifold, clear of the origin and of `r_c`.
fn default_grid(kind: ManifoldKind, rc: Option<f64>) -> (f64, f64) {
    match (kind, rc) {
        (ManifoldKind::Interior, Some(rc)) => (0.05 * rc, 0.999 * rc),
        (ManifoldKind::Exterior, Some(rc)) => (1.001 * rc, 10.0 * rc),
        _ => (0.5, 15.0),
    }
}

fn grid(start: f64, end: f64, steps: usize) -> Result<Vec<f64>, Failure> {
    if steps < 2 {
        return Err(Failure::config("--steps must be at least 2"));
    }
    if !(start.is_finite() && end.is_finite() && end > start) {
        return Err(Failure::config(format!("invalid grid [{start}, {end}]")));
    }
    Ok((0..steps)
        .map(|i| start + (end - start) * i as f64 / (steps - 1) as f64)
        .collect())
}

pub fn effective_potential_cmd(args: PotentialArgs) -> Result<(), Failure> {
    let r = Resolved::new(&args.common)?;
    let preset = match args.preset {
        Some(p) => Some(p),
        None => r.file.preset.as_deref().map(Preset::parse).transpose()?,
    };
    let (lambda, preset_kind) = match preset {
        Some(p) => {
            let (l, k) = p.lambda_and_kind();
            (r.lambda.unwrap_or(l), Some(k))
        }
        None => (r.lambda()?, None),
    };
    let params = Parameters::new(lambda, r.omega, r.n_dim.unwrap_or(3))?.with_hbar(r.hbar)?;
    let kind = match (args.kind.as_deref().or(r.file.kind.as_deref()), preset_kind) {
        (None, Some(k)) => k,
        (flag, _) => parse_kind(flag, None, lambda)?,
    };
    let c_n = args.c_n.or(r.file.c_n).unwrap_or(100.0);
    let (lo, hi) = default_grid(kind, params.critical_radius());
    let radii = grid(
        args.r_start.or(r.file.r_start).unwrap_or(lo),
        args.r_end.or(r.file.r_end).unwrap_or(hi),
        args.steps.or(r.file.steps).unwrap_or(400),
    )?;

    let mut table = Table::new(["r", "Q", "U_eff"]);
    for &x in &radii {
        if x == 0.0 && c_n > 0.0 {
            continue;
        }
        table.push(vec![x, canonical_q(&params, x, kind)?, effective_potential(&params, x, c_n, kind)?]);
    }
    let profile = potential_profile(&params, c_n, kind)?;

    match r.format {
        Format::Csv => {
            emit_table(&table, Format::Csv, r.out(), &[])?;
            let text = serde_json::to_string_pretty(&profile).map_err(std::io::Error::from)?;
            let sidecar = args
                .sidecar
                .or_else(|| r.file.sidecar.clone())
                .or_else(|| r.out.as_ref().map(|p| p.with_extension("json")));
            match sidecar {
                Some(path) => {
                    std::fs::write(&path, format!("{text}\n"))?;
                    println!("{text}");
                }
                None => eprintln!("{text}"),
            }
        }
        Format::Json => {
            #[derive(Serialize)]
            struct Dump<'a> {
                profile: &'a lambda_oscillator::radial::EffectivePotentialProfile,
                c_n: f64,
                points: &'a Table,
            }
            let mut w = sink(r.out())?;
            serde_json::to_writer_pretty(&mut w, &Dump { profile: &profile, c_n, points: &table })
                .map_err(std::io::Error::from)?;
            writeln!(w)?;
            w.flush()?;
        }
    }
    Ok(())
}


// --------------------------------------------------------------- curvature

#[derive(Debug, Args)]
pub struct CurvatureArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    kind: Option<String>,
    #[arg(long)]
    r_start: Option<f64>,
    #[arg(long)]
    r_end: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
}

pub fn curvature(args: CurvatureArgs) -> Result<(), Failure> {
    let r = Resolved::new(&args.common)?;
    let params = r.params(3)?;
    let kind = parse_kind(args.kind.as_deref(), r.file.kind.as_deref(), params.lambda)?;
    let rc = params.critical_radius();
    let (lo, hi) = match (kind, rc) {
        (ManifoldKind::Interior, Some(rc)) => (0.0, 0.999 * rc),
        (ManifoldKind::Exterior, Some(rc)) => (1.001 * rc, 5.0 * rc),
        (_, _) => (0.0, 3.0 / params.lambda.abs().sqrt().max(0.3)),
    };
    let radii = grid(
        args.r_start.or(r.file.r_start).unwrap_or(lo),
        args.r_end.or(r.file.r_end).unwrap_or(hi),
        args.steps.or(r.file.steps).unwrap_or(400),
    )?;
    let mut table = Table::new(["r", "R"]);
    for &x in &radii {
        // skip points in the guard band or on the other side of r_c
        match classify_radius(&params, x) {
            Ok(t) if t.kind == kind => table.push(vec![x, scalar_curvature_on(&params, kind, x)]),
            _ => continue,
        }
    }
    emit_table(&table, r.format, r.out(), &[])?;
    if let Some(e) = curvature_extrema(&params, kind) {
        eprintln!("extremum r={} R={}", format_f64(e.r), format_f64(e.curvature));
    }
    Ok(())
}

// ---------------------------------------------------------------- spectrum

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[command(flatten)]
    common: Common,
    /// Number of levels, starting from n = 0
    #[arg(long)]
    n_levels: Option<usize>,
}

pub fn spectrum(args: SpectrumArgs) -> Result<(), Failure> {
    let r = Resolved::new(&args.common)?;
    let params = r.params(3)?;
    let count = args.n_levels.or(r.file.n_levels).unwrap_or(20);
    if count == 0 {
        return Err(Failure::config("--n-levels must be at least 1"));
    }
    let threshold = asymptote(&params)?;
    let e = levels(&SpectrumRequest {
        params,
        n_levels: count + 1,
    })?;
    let mut table = Table::new(["n", "E_n", "gap", "asymptote_residual"]);
    for n in 0..count {
        table.push(vec![n as f64, e[n], e[n + 1] - e[n], threshold - e[n]]);
    }
    emit_table(&table, r.format, r.out(), &[0])
}

// ---------------------------------------------------------- staeckel-check

#[derive(Debug, Args)]
pub struct StaeckelArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    kind: Option<String>,
}

pub fn staeckel_check(args: StaeckelArgs) -> Result<(), Failure> {
    let r = Resolved::new(&args.common)?;
    let params = r.params(3)?;
    let kind = parse_kind(args.kind.as_deref(), r.file.kind.as_deref(), params.lambda)?;
    let samples = args.samples.or(r.file.samples).unwrap_or(100);
    if samples == 0 {
        return Err(Failure::config("--samples must be at least 1"));
    }
    let instance = build_paper_instance(&params)?;
    let transported = instance.transported();
    let mut identity: f64 = 0.0;
    let mut bracket: f64 = 0.0;
    for s in GenericSampler::new(params, kind, r.seed)?.samples(samples) {
        for (role, t) in &transported {
            let res = transport_residual(&instance, *role, t, &s)?;
            identity = identity.max(res.identity);
            bracket = bracket.max(res.bracket);
        }
    }
    let passed = identity <= IDENTITY_TOL && bracket <= BRACKET_TOL;

    #[derive(Serialize)]
    struct Report {
        alpha: f64,
        symmetries: usize,
        samples: usize,
        max_identity_residual: f64,
        max_bracket: f64,
        passed: bool,
    }
    let report = Report {
        alpha: instance.alpha,
        symmetries: transported.len(),
        samples,
        max_identity_residual: identity,
        max_bracket: bracket,
        passed,
    };
    let mut w = sink(r.out())?;
    match r.format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut w, &report).map_err(std::io::Error::from)?;
            writeln!(w)?;
        }
        Format::Csv => {
            writeln!(w, "alpha {}", format_f64(report.alpha))?;
            writeln!(w, "symmetries {}", report.symmetries)?;
            writeln!(w, "max_identity_residual {}", format_f64(identity))?;
            writeln!(w, "max_bracket {}", format_f64(bracket))?;
            writeln!(w, "status {}", if passed { "ok" } else { "FAILED" })?;
        }
    }
    w.flush()?;
    if passed {
        Ok(())
    } else {
        Err(Failure::numeric("transported symmetries exceed tolerance"))
    }
}
