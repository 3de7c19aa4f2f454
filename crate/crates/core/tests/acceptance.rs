//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits non-zero if any criterion fails.

use std::time::{Duration, Instant};

use lambda_oscillator::dynamics::{integrate, orbit_diagnostics, IntegratorConfig, Scheme};
use lambda_oscillator::integrals::{
    all_integrals, ascending_chain, descending_chain, fradkin_diagonal, independence_rank, independent_set,
    max_pairwise_bracket, poisson_bracket, GenericSampler, Hamiltonian, PhaseFunction,
};
use lambda_oscillator::model::{metric_factor_on, ManifoldKind};
use lambda_oscillator::quantum::{asymptote, energy_level, spectrum, SpectrumRequest};
use lambda_oscillator::radial::{
    canonical_p, canonical_q, effective_potential, invert_q, potential_limits, potential_minimum, radial_hamiltonian,
    Limit, RadialState,
};
use lambda_oscillator::staeckel::{build_paper_instance, transport_residual};
use lambda_oscillator::{Parameters, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const C_N: f64 = 100.0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn params(lambda: f64, n: usize) -> Parameters {
    Parameters::new(lambda, 1.0, n).unwrap()
}

/// Golden-section minimum of `f` on `[a, b]`, an independent check on the
/// closed-form minima.
fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    while (b - a).abs() > 1e-12 * (1.0 + a.abs()) {
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - inv_phi * (b - a);
        d = a + inv_phi * (b - a);
    }
    0.5 * (a + b)
}

fn minimum_check(lambda: f64, kind: ManifoldKind, r_target: f64, r_tol: f64, u_target: f64, u_tol: f64) -> Result<(bool, String)> {
    let p = params(lambda, 3);
    let m = potential_minimum(&p, C_N, kind)?.expect("minimum exists");
    let upper = p.critical_radius().map_or(50.0, |rc| rc * (1.0 - 1e-9));
    let r_num = golden_min(|r| effective_potential(&p, r, C_N, kind).unwrap(), 0.1, upper);
    let u_num = effective_potential(&p, r_num, C_N, kind)?;
    let pass = (m.r - r_target).abs() <= r_tol
        && (m.u - u_target).abs() <= u_tol
        && (r_num - m.r).abs() <= 1e-6
        && (u_num - m.u).abs() <= 1e-10 * m.u;
    Ok((
        pass,
        format!("r_min={:.6} U_min={:.6} (golden-section r={:.6})", m.r, m.u, r_num),
    ))
}

fn criterion_1() -> Result<Outcome> {
    let (ok, detail) = minimum_check(0.02, ManifoldKind::Hyperbolic, 3.49, 0.01, 8.20, 0.01)?;
    let (_, upper) = potential_limits(&params(0.02, 3), C_N, ManifoldKind::Hyperbolic)?;
    let exact = upper == Limit::Finite(25.0);
    outcome(ok && exact, format!("{detail} U_eff(inf)={}", upper.value()))
}

fn criterion_2() -> Result<Outcome> {
    let (ok, detail) = minimum_check(-0.02, ManifoldKind::Interior, 2.86, 0.01, 12.20, 0.01)?;
    let rc = params(-0.02, 3).critical_radius().unwrap();
    outcome(ok && (rc - 7.0711).abs() <= 1e-4, format!("{detail} r_c={rc:.6}"))
}

fn criterion_3() -> Result<Outcome> {
    let (ok, detail) = minimum_check(0.0, ManifoldKind::Flat, 3.162, 0.01, 10.0, 1e-10)?;
    outcome(ok, detail)
}

fn criterion_4() -> Result<Outcome> {
    let p = params(-0.02, 3);
    let kind = ManifoldKind::Exterior;
    let rc = p.critical_radius().unwrap();
    let (_, upper) = potential_limits(&p, C_N, kind)?;
    let closed_form_none = potential_minimum(&p, C_N, kind)?.is_none();
    // log-spaced scan over (r_c, 100 r_c]; a minimum would show as an interior
    // point lower than both neighbours
    let steps = 100_000;
    let values: Vec<f64> = (1..=steps)
        .map(|i| {
            let r = rc * 100f64.powf(i as f64 / steps as f64);
            effective_potential(&p, r, C_N, kind).unwrap()
        })
        .collect();
    let interior_min = values.windows(3).any(|w| w[1] < w[0] && w[1] < w[2]);
    let monotone = values.windows(2).all(|w| w[1] < w[0]);
    outcome(
        (rc - 7.07).abs() <= 0.01 && upper == Limit::Finite(25.0) && closed_form_none && !interior_min && monotone,
        format!(
            "r_c={rc:.6} U_eff(inf)={} scan minimum found: {interior_min}",
            upper.value()
        ),
    )
}

fn criterion_5() -> Result<Outcome> {
    let mut worst_bracket: f64 = 0.0;
    let mut worst_involution: f64 = 0.0;
    for n in [2, 3, 4] {
        for (lambda, kind) in [
            (0.02, ManifoldKind::Hyperbolic),
            (-0.02, ManifoldKind::Interior),
            (-0.02, ManifoldKind::Exterior),
        ] {
            let p = params(lambda, n);
            let h = Hamiltonian::on(p, kind);
            let integrals = all_integrals(&p);
            let sets = [ascending_chain(&p), descending_chain(&p), fradkin_diagonal(&p)];
            let mut sampler = GenericSampler::new(p, kind, 2024)?;
            for s in sampler.samples(100) {
                for f in &integrals {
                    worst_bracket = worst_bracket.max(poisson_bracket(&h, f.as_ref(), &s)?.abs());
                }
                for set in &sets {
                    worst_involution = worst_involution.max(max_pairwise_bracket(set, &s)?);
                }
            }
        }
    }
    outcome(
        worst_bracket <= 1e-9 && worst_involution <= 1e-9,
        format!("max |{{H,F}}|={worst_bracket:.3e} max involution residual={worst_involution:.3e}"),
    )
}

fn criterion_6() -> Result<Outcome> {
    let mut ranks = Vec::new();
    let mut pass = true;
    for n in [2, 3, 4] {
        for (lambda, kind) in [
            (0.02, ManifoldKind::Hyperbolic),
            (-0.02, ManifoldKind::Interior),
            (-0.02, ManifoldKind::Exterior),
        ] {
            let p = params(lambda, n);
            let set = independent_set(&p, 0);
            let refs: Vec<&dyn PhaseFunction> = set.iter().map(|f| f.as_ref()).collect();
            let mut sampler = GenericSampler::new(p, kind, 99)?;
            let mut found = std::collections::BTreeSet::new();
            for s in sampler.samples(20) {
                let report = independence_rank(&refs, &s)?;
                found.insert(report.rank);
                pass &= report.rank == 2 * n - 1;
            }
            ranks.push(format!("N={n} {kind}: {found:?}"));
        }
    }
    outcome(pass, ranks.join("; "))
}

fn criterion_7() -> Result<Outcome> {
    let p = params(0.02, 3);
    let states = GenericSampler::new(p, ManifoldKind::Hyperbolic, 7)?.samples(20);
    let cfg = IntegratorConfig::new(Scheme::Gauss4, 1e-3);
    let workers = std::thread::available_parallelism().map_or(4, |n| n.get()).min(states.len());
    let chunk = states.len().div_ceil(workers);
    let reports: Vec<Result<(f64, String)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = states
            .chunks(chunk)
            .map(|group| {
                scope.spawn(move || {
                    group
                        .iter()
                        .map(|s0| {
                            let traj = integrate(&p, s0, 100.0, &cfg)?;
                            let (label, v) = traj.drift_report.worst().unwrap();
                            Ok((v, label.to_string()))
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().unwrap()).collect()
    });
    let mut worst = (0.0, String::new());
    for r in reports {
        let (v, label) = r?;
        if v > worst.0 {
            worst = (v, label);
        }
    }
    outcome(worst.0 <= 1e-8, format!("worst relative drift {:.3e} ({})", worst.0, worst.1))
}

fn criterion_8() -> Result<Outcome> {
    let instance0 = build_paper_instance(&params(0.02, 3))?;
    let alpha_ok = instance0.alpha == 25.0;
    let mut worst_identity: f64 = 0.0;
    let mut worst_bracket: f64 = 0.0;
    for n in [2, 3, 4] {
        for (lambda, kind) in [(0.02, ManifoldKind::Hyperbolic), (-0.02, ManifoldKind::Interior)] {
            let p = params(lambda, n);
            let instance = build_paper_instance(&p)?;
            let transported = instance.transported();
            for s in GenericSampler::new(p, kind, 5)?.samples(100) {
                for (role, t) in &transported {
                    let res = transport_residual(&instance, *role, t, &s)?;
                    worst_identity = worst_identity.max(res.identity);
                    worst_bracket = worst_bracket.max(res.bracket);
                }
            }
        }
    }
    outcome(
        alpha_ok && worst_identity <= 1e-12 && worst_bracket <= 1e-9,
        format!(
            "alpha={} max identity residual={worst_identity:.3e} max |{{H~,S~}}|={worst_bracket:.3e}",
            instance0.alpha
        ),
    )
}

fn criterion_9() -> Result<Outcome> {
    let mut round_trip: f64 = 0.0;
    let mut derivative: f64 = 0.0;
    let mut energy: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for (lambda, kind) in [
        (0.02, ManifoldKind::Hyperbolic),
        (-0.02, ManifoldKind::Interior),
        (-0.02, ManifoldKind::Exterior),
    ] {
        let p = params(lambda, 3);
        let rc = 1.0 / lambda.abs().sqrt();
        let grid = |s: f64| match kind {
            ManifoldKind::Interior => s * (1.0 - 1e-3) * rc,
            ManifoldKind::Exterior => rc * (1.0 + 1e-3 + 4.0 * s),
            _ => 5.0 * rc * s,
        };
        for i in 0..1000 {
            let r = grid(i as f64 / 999.0);
            let back = invert_q(&p, canonical_q(&p, r, kind)?, kind)?;
            round_trip = round_trip.max((back - r).abs());
        }
        for i in 1..999 {
            let r = grid(i as f64 / 999.0);
            // step shrinks with the distance to the singular point r_c
            let h = 1e-5 * r.max(1.0).min((r - rc).abs());
            let fd = (canonical_q(&p, r + h, kind)? - canonical_q(&p, r - h, kind)?) / (2.0 * h);
            let expected = metric_factor_on(&p, kind, r).abs().sqrt();
            derivative = derivative.max((fd - expected).abs() / expected.max(1.0));
        }
        for _ in 0..200 {
            let r = grid(rng.gen_range(0.01..1.0));
            let state = RadialState {
                r,
                p_r: rng.gen_range(-3.0..3.0),
                c_n: rng.gen_range(0.0..200.0),
            };
            let big_p = canonical_p(&p, r, state.p_r, kind)?;
            let lhs = 0.5 * big_p * big_p + effective_potential(&p, r, state.c_n, kind)?;
            let rhs = radial_hamiltonian(&p, kind, &state)?;
            energy = energy.max((lhs - rhs).abs() / rhs.abs().max(1.0));
        }
    }
    outcome(
        round_trip <= 1e-12 && derivative <= 1e-8 && energy <= 1e-12,
        format!("round trip {round_trip:.3e}, dQ/dr {derivative:.3e}, energy {energy:.3e}"),
    )
}

fn criterion_10() -> Result<Outcome> {
    let p = params(0.02, 3);
    let threshold = asymptote(&p)?;
    let levels = spectrum(&SpectrumRequest { params: p, n_levels: 10_001 })?;
    let increasing = levels.windows(2).all(|w| w[1] > w[0]);
    let below = levels.iter().all(|e| *e < threshold);
    let residual = threshold - levels[10_000];
    let e0 = levels[0];
    // λ → 0⁺: halving λ halves the gap to ħω(n + N/2)
    let gap = |lambda: f64, n: usize| {
        let q = params(lambda, 3);
        (energy_level(&q, n).unwrap() - (n as f64 + 1.5)).abs()
    };
    let ratios: Vec<f64> = [0, 1, 10].iter().map(|&n| gap(1e-4, n) / gap(5e-5, n)).collect();
    let rate_ok = ratios.iter().all(|r| (r - 2.0).abs() < 0.01);
    outcome(
        increasing && below && residual < 1e-3 * threshold && (e0 - 1.45567).abs() <= 1e-5 && rate_ok,
        format!(
            "E_0={e0:.8} residual at n=1e4 {residual:.3e} (limit {:.3e}) halving ratios {ratios:.4?}",
            1e-3 * threshold
        ),
    )
}

fn criterion_11() -> Result<Outcome> {
    let p = params(0.02, 2);
    let states = GenericSampler::new(p, ManifoldKind::Hyperbolic, 11)?.samples(5);
    let cfg = IntegratorConfig::new(Scheme::Gauss4, 5e-3);
    let mut worst: f64 = 0.0;
    let mut details = Vec::new();
    for s0 in &states {
        let traj = integrate(&p, s0, 100.0, &cfg)?;
        let d = orbit_diagnostics(&traj)?;
        worst = worst.max(d.closure_residual);
        details.push(format!("k={} T_r={:.4} dphi={:.4}", d.closure_k, d.radial_period, d.angular_advance));
    }
    outcome(worst <= 1e-4, format!("worst closure residual {worst:.3e}; {}", details.join(", ")))
}

type Criterion = (&'static str, fn() -> Result<Outcome>, Option<Duration>);

fn main() {
    let criteria: [Criterion; 11] = [
        ("hyperbolic potential minimum", criterion_1, Some(Duration::from_secs(1))),
        ("spherical potential minimum", criterion_2, None),
        ("flat potential baseline", criterion_3, None),
        ("exterior potential limits", criterion_4, None),
        ("bracket suite", criterion_5, Some(Duration::from_secs(30))),
        ("independence rank", criterion_6, None),
        ("conservation under flow", criterion_7, Some(Duration::from_secs(60))),
        ("Staeckel consistency", criterion_8, None),
        ("canonical transforms", criterion_9, None),
        ("spectrum", criterion_10, None),
        ("orbit closure", criterion_11, None),
    ];
    let mut failures = 0;
    for (i, (name, run, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed();
        let within_budget = budget.is_none_or(|b| elapsed <= b);
        let (pass, detail) = match result {
            Ok(o) => (o.pass && within_budget, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failures += 1;
        }
        let budget_note = budget.map_or(String::new(), |b| format!(" / budget {:.0}s", b.as_secs_f64()));
        println!(
            "criterion {:>2} [{}] {name}: {detail} ({:.2}s{budget_note})",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failures} failed", criteria.len() - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
