//! Discrete spectrum of the quantum hyperbolic (`λ > 0`) oscillator.
//!
//! ```text
//!     E_n = -ħ² λ m² + ħ m √(ħ² λ² m² + ω²),    m = n + N/2
//! ```
//!
//! evaluated in the cancellation-free form `E_n = ħ m ω² / (√(a² + ω²) + a)`
//! with `a = ħ λ m`. Levels accumulate below the continuum threshold
//! `ω² / (2λ)`.

use crate::error::{Error, Result};
use crate::model::Parameters;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumRequest {
    pub params: Parameters,
    pub n_levels: usize,
}

fn check(params: &Parameters) -> Result<()> {
    if params.lambda > 0.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!(
            "the spectrum requires lambda > 0, got {}",
            params.lambda
        )))
    }
}

fn level(params: &Parameters, n: usize) -> f64 {
    let m = n as f64 + params.n_dim as f64 / 2.0;
    let a = params.hbar * params.lambda * m;
    let w2 = params.omega * params.omega;
    params.hbar * m * w2 / ((a * a + w2).sqrt() + a)
}

pub fn energy_level(params: &Parameters, n: usize) -> Result<f64> {
    check(params)?;
    Ok(level(params, n))
}

/// Continuum threshold `ω² / (2λ)`.
pub fn asymptote(params: &Parameters) -> Result<f64> {
    check(params)?;
    Ok(params.omega * params.omega / (2.0 * params.lambda))
}

pub fn spectrum(request: &SpectrumRequest) -> Result<Vec<f64>> {
    check(&request.params)?;
    if request.n_levels == 0 {
        return Err(Error::Parameter("n_levels must be at least 1".into()));
    }
    Ok((0..request.n_levels)
        .map(|n| level(&request.params, n))
        .collect())
}

/// Quantization of the spherical (`λ < 0`) oscillator has no closed form here.
pub fn spherical_energy_level(_params: &Parameters, _n: usize) -> Result<f64> {
    Err(Error::NotImplemented(
        "no closed-form spectrum is available for the spherical (lambda < 0) oscillator".into(),
    ))
}
