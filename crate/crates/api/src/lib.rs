//! Wire types of the identification service.
//!
//! Every body is JSON. Errors come back as [`ErrorBody`] with a non-2xx status.

use serde::{Deserialize, Serialize};
use wiener_core::harness::{ExperimentConfig, RunReport, Summary, TrajectoryRow};
use wiener_core::truth::{DataRecord, TruthScenario};

pub const HEALTH: &str = "/health";
pub const EXPERIMENTS: &str = "/v1/experiments";
pub const SUMMARIZE: &str = "/v1/summarize";
pub const ORACLE_COST: &str = "/v1/oracle/cost";
pub const DATASETS: &str = "/v1/datasets";
pub const SESSIONS: &str = "/v1/sessions";

/// Command-line style overrides applied on top of a config.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replications: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<bool>,
}

impl Overrides {
    pub fn apply(&self, config: &mut ExperimentConfig) {
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(n) = self.replications {
            config.replications = n;
        }
        if let Some(b) = self.baseline {
            config.baseline = b;
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunRequest {
    pub config: ExperimentConfig,
    #[serde(default)]
    pub overrides: Overrides,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunResponse {
    pub reports: Vec<RunReport>,
    pub summary: Summary,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SummarizeRequest {
    pub reports: Vec<RunReport>,
}

/// Offline cost at a frozen parameter on the data of one replication.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostRequest {
    pub config: ExperimentConfig,
    pub theta: Vec<f64>,
    #[serde(default)]
    pub replication: usize,
    #[serde(default)]
    pub overrides: Overrides,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostResponse {
    pub cost: f64,
    /// Time average of `ψ̄_k ε_k`.
    pub estimating_vector: Vec<f64>,
    pub param_names: Vec<String>,
    pub samples: usize,
    pub paths: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetRequest {
    pub scenario: TruthScenario,
    pub samples: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DatasetResponse {
    pub records: Vec<DataRecord>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub config: ExperimentConfig,
    /// Replication whose seed drives the Monte-Carlo streams and, for multisine
    /// inputs, the input realization.
    #[serde(default)]
    pub replication: usize,
    /// Starting estimate; drawn from the config's initialization when absent.
    #[serde(default)]
    pub theta0: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionInfo {
    pub id: String,
    pub param_names: Vec<String>,
    pub theta0: Vec<f64>,
    pub theta: Vec<f64>,
    pub samples_seen: usize,
    pub resets: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sample {
    pub t: f64,
    pub u: f64,
    pub y: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PushSamples {
    pub samples: Vec<Sample>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PushResponse {
    pub rows: Vec<TrajectoryRow>,
    pub session: SessionInfo,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Config,
    Input,
    Divergence,
    NotFound,
    Internal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub kind: ErrorKind,
    pub message: String,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_only_touch_given_fields() {
        let mut cfg = ExperimentConfig::from_toml(
            "schema_version = 1\nseed = 1\nreplications = 2\nsamples = 10\n[scenario]\nexample = \"example2\"\n\
             [estimator]\ngain_exponent = 0.85\nhessian_scale = 10.0\n[predictor]\npaths = 4\n[initialization]\npolicy = \"uniform\"\nspread = 0.5\n",
        )
        .unwrap();
        Overrides { seed: Some(9), ..Default::default() }.apply(&mut cfg);
        assert_eq!((cfg.seed, cfg.replications, cfg.baseline), (9, 2, false));
        Overrides { replications: Some(4), baseline: Some(true), seed: None }.apply(&mut cfg);
        assert_eq!((cfg.seed, cfg.replications, cfg.baseline), (9, 4, true));
    }

    #[test]
    fn error_kind_wire_names() {
        let body = ErrorBody { kind: ErrorKind::NotFound, message: "x".into() };
        assert_eq!(serde_json::to_string(&body).unwrap(), r#"{"kind":"not_found","message":"x"}"#);
    }

    #[test]
    fn unknown_request_fields_are_rejected() {
        assert!(serde_json::from_str::<PushSamples>(r#"{"samples": [], "extra": 1}"#).is_err());
        assert!(serde_json::from_str::<Sample>(r#"{"t": 1, "u": 0, "y": 0, "v": 0}"#).is_err());
    }
}
