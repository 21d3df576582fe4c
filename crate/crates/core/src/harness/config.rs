//! Versioned experiment configuration.

use serde::{Deserialize, Serialize};

use crate::estimator::EstimatorConfig;
use crate::model::reference::{
    example1_baseline_model, example2_baseline_model, make_example1_model, make_example2_model,
};
use crate::model::WienerModel;
use crate::truth::{DisturbanceCase, TruthScenario};
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Example1,
    Example2,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegressorInit {
    #[default]
    Zeros,
    /// Run the predictor over the first `n` records at `θ̂_0` before the first
    /// parameter update.
    FromData,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictorSection {
    pub paths: usize,
    #[serde(default)]
    pub stationary_init: bool,
    #[serde(default)]
    pub regressor_init: RegressorInit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case", deny_unknown_fields)]
pub enum Initialization {
    Fixed { theta: Vec<f64> },
    /// `θ̂_0,i = θ_ref,i (1 + spread·U(-1, 1))`, resampled until feasible.
    Uniform {
        spread: f64,
        /// Reference for the dispersion entry, which has no true value when the
        /// data come from a different disturbance law.
        #[serde(default)]
        sigma_reference: Option<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportSection {
    #[serde(default = "default_trailing")]
    pub trailing_fraction: f64,
    #[serde(default = "default_rel_tol")]
    pub relative_std: f64,
    #[serde(default = "default_abs_tol")]
    pub absolute_std: f64,
}

fn default_trailing() -> f64 {
    0.1
}
fn default_rel_tol() -> f64 {
    0.05
}
fn default_abs_tol() -> f64 {
    0.02
}

impl Default for ReportSection {
    fn default() -> Self {
        Self {
            trailing_fraction: default_trailing(),
            relative_std: default_rel_tol(),
            absolute_std: default_abs_tol(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub name: Option<String>,
    pub seed: u64,
    pub replications: usize,
    /// Samples per replication.
    pub samples: usize,
    #[serde(default)]
    pub baseline: bool,
    /// Defaults to the model matching the scenario.
    #[serde(default)]
    pub model: Option<ModelKind>,
    pub scenario: TruthScenario,
    pub estimator: EstimatorConfig,
    pub predictor: PredictorSection,
    pub initialization: Initialization,
    #[serde(default)]
    pub report: ReportSection,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn model_kind(&self) -> ModelKind {
        self.model.unwrap_or(match self.scenario {
            TruthScenario::Example1(_) => ModelKind::Example1,
            TruthScenario::Example2(_) => ModelKind::Example2,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.replications == 0 || self.samples == 0 {
            return Err(Error::Config("replications and samples must be at least 1".into()));
        }
        if self.predictor.paths == 0 {
            return Err(Error::Config("predictor.paths must be at least 1".into()));
        }
        let matches = matches!(
            (self.model_kind(), &self.scenario),
            (ModelKind::Example1, TruthScenario::Example1(_)) | (ModelKind::Example2, TruthScenario::Example2(_))
        );
        if !matches {
            return Err(Error::Config("model and scenario belong to different studies".into()));
        }
        let f = self.report.trailing_fraction;
        if !(f > 0.0 && f <= 1.0) {
            return Err(Error::Config(format!("trailing_fraction must be in (0, 1], got {f}")));
        }
        self.estimator.validate()?;
        self.scenario.validate()?;
        match &self.initialization {
            Initialization::Fixed { theta } => {
                let model = self.model();
                if theta.len() != model.dim() {
                    return Err(Error::Config(format!(
                        "initial theta has {} entries, the model has {}",
                        theta.len(),
                        model.dim()
                    )));
                }
                if !model.constraints.contains(theta) {
                    return Err(Error::Config(format!(
                        "initial theta {theta:?} violates {}",
                        model.constraints.description()
                    )));
                }
            }
            Initialization::Uniform { spread, .. } => {
                if !(*spread >= 0.0 && *spread < 1.0) {
                    return Err(Error::Config(format!("spread must be in [0, 1), got {spread}")));
                }
            }
        }
        Ok(())
    }

    /// The model the estimator runs, honouring the baseline flag.
    pub fn model(&self) -> WienerModel {
        match (self.model_kind(), self.baseline) {
            (ModelKind::Example1, false) => make_example1_model(),
            (ModelKind::Example1, true) => example1_baseline_model(),
            (ModelKind::Example2, false) => make_example2_model(),
            (ModelKind::Example2, true) => example2_baseline_model(),
        }
    }

    /// Paths actually simulated: one when the disturbance is ignored.
    pub fn effective_paths(&self) -> usize {
        if self.baseline {
            1
        } else {
            self.predictor.paths
        }
    }

    /// Reference parameter of the full model built from the scenario.
    pub fn reference_theta(&self) -> Vec<f64> {
        let sigma_ref = match &self.initialization {
            Initialization::Uniform { sigma_reference: Some(s), .. } => Some(*s),
            _ => None,
        };
        match &self.scenario {
            TruthScenario::Example1(t) => vec![t.a, t.b, sigma_ref.unwrap_or(t.sigma)],
            TruthScenario::Example2(t) => {
                let sigma = sigma_ref.unwrap_or(match t.disturbance {
                    DisturbanceCase::Brownian { sigma } => sigma,
                    _ => 1.0,
                });
                vec![t.a, t.b, t.c, sigma, t.alpha]
            }
        }
    }

    /// Index of the dispersion entry in the full parameter vector.
    pub fn dispersion_index(&self) -> usize {
        match self.model_kind() {
            ModelKind::Example1 => 2,
            ModelKind::Example2 => 3,
        }
    }

    /// Drops the dispersion entry of a full-model vector when the baseline is run.
    pub fn project_to_model(&self, full: &[f64]) -> Vec<f64> {
        if !self.baseline || full.len() != self.model().dim() + 1 {
            return full.to_vec();
        }
        let skip = self.dispersion_index();
        full.iter().enumerate().filter(|(i, _)| *i != skip).map(|(_, v)| *v).collect()
    }
}
