//! Experiment runner and validation oracle: configuration, replicated
//! identification runs, the offline cost, summaries and output files.

pub mod config;
mod nullable;
pub mod oracle;
pub mod output;
pub mod run;
pub mod session;
pub mod summary;

pub use config::{ExperimentConfig, Initialization, ModelKind, RegressorInit, SCHEMA_VERSION};
pub use oracle::{cost_gradient_fd, estimating_vectors, mean_estimating_vector, offline_cost};
pub use output::{load_reports, read_trajectory_csv, write_experiment, write_trajectory_csv};
pub use run::{
    identify, initial_theta, run_experiment, run_replication, window_stats, RunReport, RunStatus,
    TrajectoryRow, WindowStats,
};
pub use session::OnlineSession;
pub use summary::{summarize, ParameterSummary, RunSummary, Summary};
