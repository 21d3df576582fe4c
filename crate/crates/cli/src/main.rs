//! `identify`: runs experiments, summaries and oracle queries through the service.
//!
//! Without `--server` (or `IDENTIFY_SERVER`) an in-process service is started on
//! a loopback port and the command talks to it over HTTP like any other client.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tokio::net::TcpListener;
use wiener_api::{CostRequest, DatasetRequest, ErrorKind, Overrides, RunRequest};
use wiener_client::{Client, ClientError};
use wiener_core::harness::{load_reports, write_experiment, ExperimentConfig, Summary};
use wiener_core::rng::replication_seed;
use wiener_core::truth::Dataset;

#[derive(Parser)]
#[command(name = "identify", version, about = "Online identification of stochastic Wiener models")]
struct Cli {
    /// Service URL; an embedded service is used when absent.
    #[arg(long, env = "IDENTIFY_SERVER", global = true)]
    server: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every replication of an experiment and write trajectories and a summary.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Recompute the summary of a finished run directory.
    Summarize {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Offline validation queries.
    Oracle {
        #[command(subcommand)]
        query: OracleQuery,
    },
    /// Write the dataset of one replication as `k,t_k,u_k,y_k` CSV.
    Dataset {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        replication: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Subcommand)]
enum OracleQuery {
    /// Offline prediction-error cost at a frozen parameter.
    Cost {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated parameter values.
        #[arg(long, allow_hyphen_values = true)]
        theta: String,
        #[arg(long, default_value_t = 0)]
        replication: usize,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
}

#[derive(Args, Clone, Debug, Default)]
struct OverrideArgs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replications: Option<usize>,
    /// Ignore the disturbance (single path, no dispersion parameter).
    #[arg(long)]
    baseline: bool,
}

impl OverrideArgs {
    fn to_api(&self) -> Overrides {
        Overrides { seed: self.seed, replications: self.replications, baseline: self.baseline.then_some(true) }
    }
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Service(#[from] ClientError),
    #[error("{0}")]
    Core(#[from] wiener_core::Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Service(e) => match e.kind() {
                Some(ErrorKind::Config | ErrorKind::Input) => 2,
                Some(ErrorKind::Divergence) => 3,
                _ => 1,
            },
            CliError::Core(wiener_core::Error::Config(_)) => 2,
            CliError::Core(_) | CliError::Io(_) => 1,
        }
    }
}

fn load_config(path: &Path, overrides: &Overrides) -> Result<ExperimentConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut config = ExperimentConfig::from_toml(&text).map_err(|e| CliError::Config(e.to_string()))?;
    overrides.apply(&mut config);
    config.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(config)
}

fn parse_theta(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| CliError::Config(format!("bad theta entry {v:?}: {e}"))))
        .collect()
}

async fn connect(server: Option<String>) -> Result<Client, CliError> {
    if let Some(url) = server {
        return Ok(Client::new(url));
    }
    let listener = TcpListener::bind("127.0.0.1:0").await?;
    let addr = listener.local_addr()?;
    tokio::spawn(wiener_service::serve(listener));
    Ok(Client::new(format!("http://{addr}")))
}

fn print_summary(summary: &Summary) {
    println!(
        "replications {}  completed {}  diverged {}  converged {}",
        summary.replications, summary.completed, summary.diverged, summary.converged
    );
    println!("{:<8} {:>14} {:>14} {:>14} {:>10}", "param", "window_median", "q1", "q3", "converged");
    for p in &summary.parameters {
        println!("{:<8} {:>14.6} {:>14.6} {:>14.6} {:>10}", p.name, p.window_median, p.q1, p.q3, p.converged_runs);
    }
}

async fn execute(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Run { config, out, overrides } => {
            let overrides = overrides.to_api();
            let config = load_config(&config, &overrides)?;
            let client = connect(cli.server).await?;
            let resp = client.run(&RunRequest { config: config.clone(), overrides: Overrides::default() }).await?;
            write_experiment(&out, &resp.reports, &resp.summary)?;
            fs::write(out.join("config.toml"), config.to_toml()?)?;
            print_summary(&resp.summary);
            if resp.summary.any_diverged() {
                for r in resp.summary.runs.iter().filter(|r| !matches!(r.status, wiener_core::harness::RunStatus::Completed)) {
                    eprintln!("replication {} diverged: {:?}", r.replication, r.status);
                }
                return Ok(3);
            }
            Ok(0)
        }
        Command::Summarize { input } => {
            let reports = load_reports(&input).map_err(|e| CliError::Config(e.to_string()))?;
            let client = connect(cli.server).await?;
            let summary = client.summarize(reports).await?;
            fs::write(input.join("summary.json"), serde_json::to_vec_pretty(&summary).map_err(wiener_core::Error::from)?)?;
            println!("{}", serde_json::to_string_pretty(&summary).map_err(wiener_core::Error::from)?);
            Ok(0)
        }
        Command::Oracle { query: OracleQuery::Cost { config, theta, replication, overrides } } => {
            let overrides = overrides.to_api();
            let config = load_config(&config, &overrides)?;
            let theta = parse_theta(&theta)?;
            let client = connect(cli.server).await?;
            let resp = client
                .oracle_cost(&CostRequest { config, theta, replication, overrides: Overrides::default() })
                .await?;
            println!("{}", serde_json::to_string_pretty(&resp).map_err(wiener_core::Error::from)?);
            Ok(0)
        }
        Command::Dataset { config, out, replication, seed } => {
            let config = load_config(&config, &Overrides { seed, ..Default::default() })?;
            let seed = replication_seed(config.seed, replication);
            let client = connect(cli.server).await?;
            let records = client
                .dataset(&DatasetRequest { scenario: config.scenario.clone(), samples: config.samples, seed })
                .await?;
            let data = Dataset::new(config.scenario.input_mode(seed), records)?;
            data.write_csv(fs::File::create(&out)?)?;
            Ok(0)
        }
    }
}

#[tokio::main]
async fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli).await {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("identify: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
