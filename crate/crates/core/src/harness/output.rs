//! On-disk layout of an experiment directory.
//!
//! ```text
//! <dir>/run_000.csv    trajectory: k,t,eps,proj_hit,theta_1,...,theta_d
//! <dir>/run_000.json   report without the trajectory rows
//! <dir>/summary.json   cross-replication summary
//! ```

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use super::run::{RunReport, TrajectoryRow};
use super::summary::Summary;
use crate::truth::format_float;
use crate::{Error, Result};

pub fn trajectory_header(d: usize) -> Vec<String> {
    let mut h: Vec<String> = ["k", "t", "eps", "proj_hit"].iter().map(|s| s.to_string()).collect();
    h.extend((1..=d).map(|j| format!("theta_{j}")));
    h
}

pub fn write_trajectory_csv<W: Write>(rows: &[TrajectoryRow], d: usize, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(trajectory_header(d))?;
    for r in rows {
        let mut rec = vec![r.k.to_string(), format_float(r.t), format_float(r.eps), u8::from(r.proj_hit).to_string()];
        rec.extend(r.theta.iter().map(|v| format_float(*v)));
        w.write_record(rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trajectory_csv<R: Read>(reader: R) -> Result<Vec<TrajectoryRow>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    let d = headers.len().saturating_sub(4);
    if headers.iter().collect::<Vec<_>>() != trajectory_header(d) {
        return Err(Error::input(format!("unexpected trajectory header {headers:?}")));
    }
    let parse = |s: &str| s.parse::<f64>().map_err(|e| Error::input(format!("bad number {s:?}: {e}")));
    rdr.records()
        .map(|rec| {
            let rec = rec?;
            Ok(TrajectoryRow {
                k: rec[0].parse().map_err(|e| Error::input(format!("bad step index: {e}")))?,
                t: parse(&rec[1])?,
                eps: parse(&rec[2])?,
                proj_hit: &rec[3] == "1",
                theta: (4..rec.len()).map(|i| parse(&rec[i])).collect::<Result<_>>()?,
            })
        })
        .collect()
}

fn run_stem(dir: &Path, replication: usize) -> PathBuf {
    dir.join(format!("run_{replication:03}"))
}

/// Writes trajectories, per-run reports and the summary.
pub fn write_experiment(dir: &Path, reports: &[RunReport], summary: &Summary) -> Result<()> {
    fs::create_dir_all(dir)?;
    for r in reports {
        let stem = run_stem(dir, r.replication);
        let d = r.param_names.len();
        write_trajectory_csv(&r.rows, d, fs::File::create(stem.with_extension("csv"))?)?;
        let meta = RunReport { rows: Vec::new(), ..r.clone() };
        fs::write(stem.with_extension("json"), serde_json::to_vec_pretty(&meta)?)?;
    }
    fs::write(dir.join("summary.json"), serde_json::to_vec_pretty(summary)?)?;
    Ok(())
}

/// Reads back every `run_*.json` with its trajectory.
pub fn load_reports(dir: &Path) -> Result<Vec<RunReport>> {
    let mut reports = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        if !(name.starts_with("run_") && name.ends_with(".json")) {
            continue;
        }
        let mut report: RunReport = serde_json::from_slice(&fs::read(&path)?)?;
        let csv = path.with_extension("csv");
        if csv.exists() {
            report.rows = read_trajectory_csv(fs::File::open(csv)?)?;
        }
        reports.push(report);
    }
    if reports.is_empty() {
        return Err(Error::input(format!("no run reports in {}", dir.display())));
    }
    reports.sort_by_key(|r| r.replication);
    Ok(reports)
}
