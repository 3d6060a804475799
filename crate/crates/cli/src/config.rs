//! Run configuration: one JSON document per run, overridable by flags.

use std::path::{Path, PathBuf};

use hemisel::estimators::{
    BoundaryConfig, CdfConfig, FourierConfig, FourierGrids, IntegralConfig, Method, SeriesConfig,
};
use hemisel::selection::ModelSpec;
use hemisel::survey::ImputeConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Resolved configuration. `out` and `threads` do not affect results and
/// are not echoed.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing)]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing)]
    pub threads: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimate: Option<EstimateConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub impute: Option<ImputeSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub model: ModelSpec,
    pub n: usize,
    #[serde(default)]
    pub keep_latents: bool,
    /// Design weight written for every unit.
    #[serde(default = "one")]
    pub weight: f64,
}

fn one() -> f64 {
    1.0
}

/// Outcome transformation `phi`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Phi {
    #[default]
    One,
    Identity,
    Square,
    /// `1{y <= t}`.
    Indicator { t: f64 },
}

impl Phi {
    pub fn eval(self, y: f64) -> f64 {
        match self {
            Phi::One => 1.0,
            Phi::Identity => y,
            Phi::Square => y * y,
            Phi::Indicator { t } => f64::from(u8::from(y <= t)),
        }
    }
}

/// Restriction to units with `x_column = value` (1-based column).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct XCell {
    pub column: usize,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateConfig {
    pub data: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_cell: Option<XCell>,
    #[serde(default)]
    pub phi: Phi,
    pub estimator: EstimatorSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EstimatorSpec {
    MeanByIntegral {
        #[serde(default)]
        config: IntegralConfig,
    },
    MeanAtBoundary {
        /// Defaults to `e_2`.
        #[serde(default)]
        s_tilde: Option<Vec<f64>>,
        #[serde(default)]
        config: BoundaryConfig,
    },
    Series {
        truncation: usize,
        #[serde(default = "default_resolution")]
        grid_resolution: usize,
        /// `E[phi(Y)]`; estimated at the boundary when absent.
        #[serde(default)]
        mean_estimate: Option<f64>,
        #[serde(default)]
        s_tilde: Option<Vec<f64>>,
        #[serde(default)]
        boundary: BoundaryConfig,
        #[serde(default)]
        config: SeriesConfig,
    },
    Fourier {
        grids: FourierGrids,
        cutoff: f64,
        #[serde(default)]
        config: FourierConfig,
    },
    NonrespondentCdf {
        method: Method,
        #[serde(default = "default_grid_points")]
        grid_points: usize,
        /// Explicit t-grid; overrides `grid_points`.
        #[serde(default)]
        t_grid: Option<Vec<f64>>,
        #[serde(default)]
        config: CdfConfig,
    },
}

fn default_resolution() -> usize {
    32
}

fn default_grid_points() -> usize {
    512
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImputeSection {
    pub data: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_cell: Option<XCell>,
    /// Write every replicate into the report.
    #[serde(default = "yes")]
    pub include_replicates: bool,
    /// `imputation.seed` is replaced by the run seed.
    #[serde(default)]
    pub imputation: ImputeConfig,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    /// Finite population size.
    pub population: usize,
    /// Simple random sample size drawn without replacement.
    pub sample: usize,
    pub reps: usize,
    /// `imputation.seed` is replaced by per-rep derived seeds.
    #[serde(default)]
    pub imputation: ImputeConfig,
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Parses a document; errors carry the JSON field path.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(&mut *de)
            .map_err(|e| CliError::Config(format!("config field `{}`: {}", e.path(), e.inner())))?;
        de.end().map_err(|e| CliError::Config(format!("config: {e}")))?;
        Ok(cfg)
    }

    /// Canonical sidecar text.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }
}
