//! The JSON scenario file.

use std::path::PathBuf;

use fdr_core::{builtin_affine, FuturesSpec, Model, XGrid};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// A built-in family by name, or a full model description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelSpec {
    Named(String),
    Explicit(Model),
}

impl ModelSpec {
    pub fn resolve(&self) -> Result<Model, CliError> {
        match self {
            ModelSpec::Explicit(m) => Ok(m.clone()),
            ModelSpec::Named(name) if name == "gaussian-example" => Ok(Model::GaussianExample),
            ModelSpec::Named(name) => builtin_affine(name).map(Model::Affine).ok_or_else(|| {
                CliError::Config(format!(
                    "unknown model `{name}`; expected gaussian-example or one of {}",
                    fdr_core::curves::BUILTIN_AFFINE.join(", ")
                ))
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GridSpec {
    Chebyshev { n: usize, lo: f64, hi: f64 },
    Uniform { n: usize, lo: f64, hi: f64 },
    Nodes { nodes: Vec<f64> },
}

impl GridSpec {
    pub fn build(&self) -> Result<XGrid, CliError> {
        let g = match self {
            GridSpec::Chebyshev { n, lo, hi } => XGrid::chebyshev(*n, *lo, *hi),
            GridSpec::Uniform { n, lo, hi } => XGrid::uniform(*n, *lo, *hi),
            GridSpec::Nodes { nodes } => XGrid::new(nodes.clone()),
        };
        g.map_err(|e| CliError::Config(format!("grid: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DriftSpec {
    /// Solved from the drift condition for the scenario's `sigma`.
    RiskNeutral,
    Zero,
    Constant(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSpec {
    pub dt: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub n_paths: usize,
    pub seed: u64,
    /// Defaults to the origin.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub y0: Vec<f64>,
    #[serde(default = "risk_neutral")]
    pub drift: DriftSpec,
}

fn risk_neutral() -> DriftSpec {
    DriftSpec::RiskNeutral
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconstructSpec {
    pub x0: f64,
    #[serde(default = "default_rk_steps")]
    pub n_steps: usize,
}

fn default_rk_steps() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub model: ModelSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub y_samples: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_y: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub futures: Vec<FuturesSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Pass/fail threshold; each subcommand has its own default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reconstruct: Option<ReconstructSpec>,
    /// Binary path file used by `estimate-vol` and `scc-loop` instead of
    /// simulating.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observed_paths: Option<PathBuf>,
    /// Diffusion matrix `scc-loop` probes with in place of the estimate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_override: Option<Vec<Vec<f64>>>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("scenario: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serialises")
    }

    pub fn grid(&self) -> Result<XGrid, CliError> {
        match &self.grid {
            Some(g) => g.build(),
            None => Ok(XGrid::default()),
        }
    }

    pub fn sigma(&self, d: usize) -> Result<DMatrix<f64>, CliError> {
        let rows = self.sigma.as_ref().ok_or_else(|| CliError::Config("scenario has no `sigma`".into()))?;
        matrix("sigma", rows, d)
    }

    pub fn sigma_override(&self, d: usize) -> Result<Option<DMatrix<f64>>, CliError> {
        self.sigma_override.as_ref().map(|rows| matrix("sigma_override", rows, d)).transpose()
    }

    pub fn y_samples(&self, d: usize) -> Result<&[Vec<f64>], CliError> {
        if self.y_samples.is_empty() {
            return Err(CliError::Config("scenario has no `y_samples`".into()));
        }
        for (i, y) in self.y_samples.iter().enumerate() {
            if y.len() != d {
                return Err(CliError::Config(format!("y_samples[{i}] has length {}, model has {d} factors", y.len())));
            }
        }
        Ok(&self.y_samples)
    }

    pub fn base_y(&self, d: usize) -> Result<Vec<f64>, CliError> {
        match &self.base_y {
            Some(b) if b.len() != d => Err(CliError::Config(format!("base_y has length {}, expected {d}", b.len()))),
            Some(b) => Ok(b.clone()),
            None => Ok(vec![0.0; d]),
        }
    }

    pub fn sim(&self) -> Result<&SimSpec, CliError> {
        self.sim.as_ref().ok_or_else(|| CliError::Config("scenario has no `sim` block".into()))
    }

    pub fn futures(&self) -> Result<&[FuturesSpec], CliError> {
        if self.futures.is_empty() {
            return Err(CliError::Config("scenario has no `futures`".into()));
        }
        Ok(&self.futures)
    }
}

fn matrix(name: &str, rows: &[Vec<f64>], d: usize) -> Result<DMatrix<f64>, CliError> {
    if rows.len() != d || rows.iter().any(|r| r.len() != d) {
        return Err(CliError::Config(format!("{name} must be {d}x{d}")));
    }
    Ok(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
}
