//! Optional JSON run configuration. Command-line flags take precedence over
//! values read from the file.

use std::path::{Path, PathBuf};

use lambda_oscillator::dynamics::IntegratorConfig;
use serde::Deserialize;

use crate::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub lambda: Option<f64>,
    pub omega: Option<f64>,
    pub n_dim: Option<usize>,
    pub hbar: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,

    // simulate
    pub q0: Option<Vec<f64>>,
    pub p0: Option<Vec<f64>>,
    pub t_end: Option<f64>,
    pub integrator: Option<IntegratorConfig>,

    // verify, staeckel-check
    pub samples: Option<usize>,
    pub kind: Option<String>,

    // effective-potential, curvature
    pub preset: Option<String>,
    pub c_n: Option<f64>,
    pub r_start: Option<f64>,
    pub r_end: Option<f64>,
    pub steps: Option<usize>,
    pub sidecar: Option<PathBuf>,

    // spectrum
    pub n_levels: Option<usize>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Failure::config(format!("invalid config {}: {e}", path.display())))
    }
}
