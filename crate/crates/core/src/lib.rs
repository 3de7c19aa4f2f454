//! Maximally superintegrable λ-deformed oscillator on N-dimensional Darboux
//! spaces.
//!
//! The library evaluates the Hamiltonian `H = (p² + ω² q²) / (2(1 + λ q²))`,
//! its full set of integrals of motion, the Stäckel transform relating it to
//! free Euclidean motion, symplectic flows, the radial reduction with its
//! effective potentials, and the discrete quantum spectrum of the
//! hyperbolic (`λ > 0`) oscillator.

pub mod dynamics;
pub mod error;
pub mod integrals;
pub mod model;
pub mod quantum;
pub mod radial;
pub mod staeckel;

pub use error::{Error, Result};
pub use model::{ManifoldKind, ManifoldType, Parameters, PhaseGradient, PhaseState};

/// Formats a float with 17 significant digits, which round-trips every `f64`.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}
