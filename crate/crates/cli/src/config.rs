use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Decompose,
    Brown,
    Project,
    Verify,
    Curve,
}

/// Overrides of the default check tolerances.
#[derive(Args, Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TolOverrides {
    /// Bound on |NN* - N*N|_F / |N|_F^2 (default 1e-9).
    #[arg(long = "tol-normality")]
    pub normality: Option<f64>,
    /// Bound on the eigenvalue matching distance between N and T (default 1e-8).
    #[arg(long = "tol-measure")]
    pub measure: Option<f64>,
    /// Bound on the eigenvalues of Q relative to max(1, |T|) (default 1e-8).
    #[arg(long = "tol-quasinilpotent")]
    pub quasinilpotent: Option<f64>,
    /// Bound on the per-cell gap between density and counting masses (default 0.05).
    #[arg(long = "tol-density")]
    pub density: Option<f64>,
}

/// Everything a run depends on; written to `config.json` so that `replay`
/// reproduces the run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    pub matrix: Option<PathBuf>,
    pub ensemble: Option<String>,
    pub curves: Vec<String>,
    pub regions: Vec<String>,
    pub level: Option<u32>,
    pub grid: Option<usize>,
    pub eps: Option<f64>,
    pub checks: Vec<String>,
    pub out: PathBuf,
    pub seed: u64,
    pub tol: TolOverrides,
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let s = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&s).with_context(|| format!("parsing {}", path.display()))
    }
}
