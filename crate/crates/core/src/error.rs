use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("state outside the domain: {0}")]
    Domain(String),

    #[error("|q| = {radius} lies within the guard band of the critical radius r_c = {critical_radius}")]
    Singularity { radius: f64, critical_radius: f64 },

    #[error("the flat limit lambda = 0 is not supported here")]
    FlatLimit,

    #[error("implicit solve did not converge at t = {time} after {iterations} iterations (residual {residual:e})")]
    Convergence {
        time: f64,
        iterations: usize,
        residual: f64,
    },

    #[error("trajectory left the domain at t = {time}")]
    DomainExit { time: f64 },

    #[error("no bound radial motion detected: {0}")]
    UnboundOrbit(String),

    #[error("degenerate phase point: Jacobian rank collapsed to {rank}")]
    DegenerateState { rank: usize },

    #[error("hyperspherical chart undefined at the origin")]
    Origin,

    #[error("hyperspherical chart singular: sin(theta_{index}) = 0")]
    Chart { index: usize },

    #[error("value {value} outside the image interval [{low}, {high})")]
    Range { value: f64, low: f64, high: f64 },

    #[error("not implemented: {0}")]
    NotImplemented(String),
}
