//! Cross-replication summary document.

use serde::{Deserialize, Serialize};

use super::run::{median, quantile_sorted, RunReport, RunStatus};
use crate::{Error, Result};

pub const SUMMARY_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterSummary {
    pub name: String,
    /// Over completed replications' final estimates.
    #[serde(with = "super::nullable")]
    pub median: f64,
    #[serde(with = "super::nullable")]
    pub q1: f64,
    #[serde(with = "super::nullable")]
    pub q3: f64,
    #[serde(with = "super::nullable")]
    pub iqr: f64,
    /// Median of absolute final estimates, for parameters identifiable only in magnitude.
    #[serde(with = "super::nullable")]
    pub median_abs: f64,
    /// Median over replications of the trailing-window medians.
    #[serde(with = "super::nullable")]
    pub window_median: f64,
    pub converged_runs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub replication: usize,
    pub seed: u64,
    pub status: RunStatus,
    pub steps: usize,
    pub final_theta: Vec<f64>,
    pub window_median: Option<Vec<f64>>,
    pub window_std: Option<Vec<f64>>,
    pub converged: bool,
    pub wall_clock_secs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub replications: usize,
    pub completed: usize,
    pub diverged: usize,
    pub converged: usize,
    pub parameters: Vec<ParameterSummary>,
    pub runs: Vec<RunSummary>,
}

impl Summary {
    pub fn any_diverged(&self) -> bool {
        self.diverged > 0
    }
}

/// Reduces reports (sorted by replication index) to the summary document.
pub fn summarize(reports: &[RunReport]) -> Result<Summary> {
    if reports.is_empty() {
        return Err(Error::input("nothing to summarize"));
    }
    let mut sorted: Vec<&RunReport> = reports.iter().collect();
    sorted.sort_by_key(|r| r.replication);
    let names = &sorted[0].param_names;
    if sorted.iter().any(|r| &r.param_names != names) {
        return Err(Error::input("reports come from different models"));
    }
    let completed: Vec<&&RunReport> =
        sorted.iter().filter(|r| matches!(r.status, RunStatus::Completed)).collect();
    let parameters = names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let mut finals: Vec<f64> = completed.iter().map(|r| r.final_theta[j]).collect();
            finals.sort_by(f64::total_cmp);
            let mut abs: Vec<f64> = finals.iter().map(|v| v.abs()).collect();
            let mut windows: Vec<f64> =
                completed.iter().filter_map(|r| r.window.as_ref().map(|w| w.median[j])).collect();
            let q1 = quantile_sorted(&finals, 0.25);
            let q3 = quantile_sorted(&finals, 0.75);
            ParameterSummary {
                name: name.clone(),
                median: quantile_sorted(&finals, 0.5),
                q1,
                q3,
                iqr: q3 - q1,
                median_abs: median(&mut abs),
                window_median: median(&mut windows),
                converged_runs: completed
                    .iter()
                    .filter(|r| r.window.as_ref().is_some_and(|w| w.converged[j]))
                    .count(),
            }
        })
        .collect();
    let runs = sorted
        .iter()
        .map(|r| RunSummary {
            replication: r.replication,
            seed: r.seed,
            status: r.status.clone(),
            steps: r.rows.len(),
            final_theta: r.final_theta.clone(),
            window_median: r.window.as_ref().map(|w| w.median.clone()),
            window_std: r.window.as_ref().map(|w| w.std.clone()),
            converged: r.converged(),
            wall_clock_secs: r.wall_clock_secs,
        })
        .collect();
    Ok(Summary {
        schema_version: SUMMARY_SCHEMA_VERSION,
        replications: sorted.len(),
        completed: completed.len(),
        diverged: sorted.len() - completed.len(),
        converged: sorted.iter().filter(|r| r.converged()).count(),
        parameters,
        runs,
    })
}
