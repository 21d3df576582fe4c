//! Monte-Carlo replication of full identification runs.

use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Initialization};
use super::session::OnlineSession;
use crate::model::WienerModel;
use crate::rng::{replication_seed, stream, Channel};
use crate::truth::Dataset;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub k: u64,
    pub t: f64,
    #[serde(with = "super::nullable")]
    pub eps: f64,
    pub proj_hit: bool,
    pub theta: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Diverged { step: usize, reason: String },
}

/// Statistics of each parameter over the trailing part of a trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowStats {
    pub length: usize,
    pub mean: Vec<f64>,
    pub median: Vec<f64>,
    pub std: Vec<f64>,
    pub converged: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub replication: usize,
    pub seed: u64,
    pub param_names: Vec<String>,
    pub theta0: Vec<f64>,
    pub final_theta: Vec<f64>,
    pub status: RunStatus,
    pub resets: usize,
    pub window: Option<WindowStats>,
    pub wall_clock_secs: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rows: Vec<TrajectoryRow>,
}

impl RunReport {
    pub fn converged(&self) -> bool {
        matches!(self.status, RunStatus::Completed)
            && self.window.as_ref().is_some_and(|w| w.converged.iter().all(|&c| c))
    }
}

pub(crate) fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    quantile_sorted(values, 0.5)
}

/// Linear-interpolation quantile of sorted data.
pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Trailing-window statistics over the last `ceil(fraction·len)` rows.
pub fn window_stats(
    rows: &[TrajectoryRow],
    fraction: f64,
    relative_std: f64,
    absolute_std: f64,
) -> Result<WindowStats> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::input(format!("trailing fraction must be in (0, 1], got {fraction}")));
    }
    let len = ((rows.len() as f64) * fraction).ceil() as usize;
    if len == 0 {
        return Err(Error::input("trailing window is empty"));
    }
    let window = &rows[rows.len() - len..];
    let d = window[0].theta.len();
    let mut stats = WindowStats { length: len, mean: vec![], median: vec![], std: vec![], converged: vec![] };
    for j in 0..d {
        let mut col: Vec<f64> = window.iter().map(|r| r.theta[j]).collect();
        let mean = col.iter().sum::<f64>() / len as f64;
        let var = if len > 1 {
            col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (len - 1) as f64
        } else {
            0.0
        };
        let std = var.sqrt();
        stats.mean.push(mean);
        stats.std.push(std);
        stats.median.push(median(&mut col));
        stats.converged.push(std < (relative_std * mean.abs()).max(absolute_std));
    }
    Ok(stats)
}

/// Draws `θ̂_0` for the full model.
pub fn initial_theta(config: &ExperimentConfig, run_seed: u64) -> Result<Vec<f64>> {
    let full = {
        let mut c = config.clone();
        c.baseline = false;
        c.model()
    };
    match &config.initialization {
        Initialization::Fixed { theta } => Ok(theta.clone()),
        Initialization::Uniform { spread, .. } => {
            let reference = config.reference_theta();
            let mut rng = stream(run_seed, Channel::Init, 0, 0);
            for _ in 0..1000 {
                let theta: Vec<f64> = reference
                    .iter()
                    .map(|r| r * (1.0 + spread * rng.random_range(-1.0..=1.0)))
                    .collect();
                if full.constraints.contains(&theta) {
                    return Ok(theta);
                }
            }
            Err(Error::Config("no feasible initial parameter after 1000 draws".into()))
        }
    }
}

/// Runs the online estimator over `data` from `theta0`.
pub fn identify(
    config: &ExperimentConfig,
    model: &WienerModel,
    data: &Dataset,
    theta0: Vec<f64>,
    run_seed: u64,
) -> (Vec<TrajectoryRow>, RunStatus, usize) {
    let mut rows = Vec::with_capacity(data.len());
    let mut session = match OnlineSession::new(config, model.clone(), data.input.clone(), theta0, run_seed) {
        Ok(s) => s,
        Err(e) => return (rows, RunStatus::Diverged { step: 0, reason: e.to_string() }, 0),
    };
    for ((input, y), record) in data.steps().zip(&data.records) {
        match session.step(&input, y, record.t_k) {
            Ok(row) => rows.push(row),
            Err(Error::Divergence { step, reason }) => {
                return (rows, RunStatus::Diverged { step, reason }, session.resets());
            }
            Err(e) => {
                let step = session.samples_seen();
                return (rows, RunStatus::Diverged { step, reason: e.to_string() }, session.resets());
            }
        }
    }
    let resets = session.resets();
    (rows, RunStatus::Completed, resets)
}

/// Generates the data of replication `r` and identifies the model on it.
pub fn run_replication(config: &ExperimentConfig, replication: usize) -> Result<RunReport> {
    let started = Instant::now();
    let seed = replication_seed(config.seed, replication);
    let data = config.scenario.generate(config.samples, seed)?;
    let model = config.model();
    let theta0 = config.project_to_model(&initial_theta(config, seed)?);
    let (rows, status, resets) = identify(config, &model, &data, theta0.clone(), seed);
    let window = if rows.is_empty() {
        None
    } else {
        Some(window_stats(&rows, config.report.trailing_fraction, config.report.relative_std, config.report.absolute_std)?)
    };
    Ok(RunReport {
        replication,
        seed,
        param_names: model.param_names.clone(),
        final_theta: rows.last().map(|r| r.theta.clone()).unwrap_or_else(|| theta0.clone()),
        theta0,
        status,
        resets,
        window,
        wall_clock_secs: started.elapsed().as_secs_f64(),
        rows,
    })
}

/// All replications, in parallel, ordered by replication index.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<RunReport>> {
    config.validate()?;
    (0..config.replications)
        .into_par_iter()
        .map(|r| run_replication(config, r))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::reference::make_example2_model;
    use crate::harness::RegressorInit;
    use crate::truth::{DisturbanceCase, Example2Truth, TruthScenario};

    fn small_config() -> ExperimentConfig {
        ExperimentConfig::from_toml(
            r#"
schema_version = 1
seed = 3
replications = 2
samples = 300
[scenario]
example = "example2"
[estimator]
gain_exponent = 0.85
hessian_scale = 10.0
[predictor]
paths = 10
[initialization]
policy = "uniform"
spread = 0.5
"#,
        )
        .unwrap()
    }

    #[test]
    fn runs_are_deterministic_and_feasible() {
        let cfg = small_config();
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a.len(), 2);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.rows, y.rows);
            assert_eq!(x.rows.len(), 300);
            let model = make_example2_model();
            assert!(x.rows.iter().all(|r| model.constraints.contains(&r.theta)));
        }
        assert_ne!(a[0].rows, a[1].rows);
    }

    #[test]
    fn initial_draws_stay_within_spread() {
        let cfg = small_config();
        for r in 0..20 {
            let seed = replication_seed(cfg.seed, r);
            let theta = initial_theta(&cfg, seed).unwrap();
            for (t, ref_v) in theta.iter().zip(cfg.reference_theta()) {
                assert!((t / ref_v - 1.0).abs() <= 0.5 + 1e-12);
            }
        }
    }

    #[test]
    fn baseline_runs_the_reduced_model() {
        let mut cfg = small_config();
        cfg.baseline = true;
        cfg.replications = 1;
        let reports = run_experiment(&cfg).unwrap();
        assert_eq!(reports[0].final_theta.len(), 4);
        assert_eq!(reports[0].param_names, vec!["a", "b", "c", "alpha"]);
        let full = initial_theta(&cfg, reports[0].seed).unwrap();
        assert_eq!(reports[0].theta0, vec![full[0], full[1], full[2], full[4]]);
    }

    #[test]
    fn warm_up_delays_the_first_update() {
        let mut cfg = small_config();
        cfg.replications = 1;
        cfg.predictor.regressor_init = RegressorInit::FromData;
        let r = run_replication(&cfg, 0).unwrap();
        assert_eq!(r.rows[0].theta, r.theta0);
        assert_eq!(r.rows[1].theta, r.theta0);
        assert_ne!(r.rows[2].theta, r.theta0);
    }

    #[test]
    fn divergence_is_reported_with_partial_rows() {
        let mut cfg = small_config();
        cfg.replications = 1;
        cfg.estimator.max_norm = 1.0;
        let r = run_replication(&cfg, 0).unwrap();
        match r.status {
            RunStatus::Diverged { step, .. } => assert_eq!(r.rows.len(), step - 1),
            RunStatus::Completed => panic!("expected divergence"),
        }
    }

    #[test]
    fn window_statistics() {
        let rows: Vec<TrajectoryRow> = (0..100)
            .map(|k| TrajectoryRow { k, t: k as f64, eps: 0.0, proj_hit: false, theta: vec![k as f64, 1.0] })
            .collect();
        let w = window_stats(&rows, 0.1, 0.05, 0.02).unwrap();
        assert_eq!(w.length, 10);
        assert_eq!(w.mean, vec![94.5, 1.0]);
        assert_eq!(w.median, vec![94.5, 1.0]);
        assert_eq!(w.converged, vec![true, true]);
        assert!(window_stats(&rows, 0.0, 0.05, 0.02).is_err());
        assert!(window_stats(&[], 0.1, 0.05, 0.02).is_err());
    }

    #[test]
    fn scenario_seed_controls_data() {
        let t = TruthScenario::Example2(Example2Truth::with_case(DisturbanceCase::case2()));
        assert_eq!(t.generate(20, 1).unwrap(), t.generate(20, 1).unwrap());
    }
}
