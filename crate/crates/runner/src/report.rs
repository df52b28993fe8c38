use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::metrics::Metrics;
use crate::scenario::Scenario;
use crate::sim::{RunReport, SolverStats, StepRecord, TimingStats};
use crate::RunnerError;

/// Everything deterministic about a run; serialized as `metrics.json`.
#[derive(Serialize)]
struct MetricsFile<'a> {
    schema_version: u32,
    name: &'a str,
    seed: u64,
    failed_at: Option<usize>,
    metrics: &'a Metrics,
    solver: &'a SolverStats,
    scenario: &'a Scenario,
}

/// Wall-clock diagnostics; serialized separately because they differ
/// between runs of the same seed.
#[derive(Serialize)]
struct TimingFile<'a> {
    timing: &'a TimingStats,
}

fn write(path: &Path, contents: &str) -> Result<(), RunnerError> {
    fs::write(path, contents).map_err(|e| RunnerError::io(path, e))
}

/// Writes `trajectory.csv`, `metrics.json`, `plotdata_tracking.csv`,
/// `plotdata_input.csv` (all byte-stable for a fixed seed) and
/// `timing.json` (not byte-stable). Returns the paths written.
pub fn emit_report(report: &RunReport, out_dir: &Path) -> Result<Vec<PathBuf>, RunnerError> {
    fs::create_dir_all(out_dir).map_err(|e| RunnerError::io(out_dir, e))?;
    let mut written = Vec::new();

    let traj_path = out_dir.join("trajectory.csv");
    write(&traj_path, &trajectory_csv(&report.steps))?;
    written.push(traj_path);

    let metrics_path = out_dir.join("metrics.json");
    let metrics_file = MetricsFile {
        schema_version: report.scenario.schema_version,
        name: &report.scenario.name,
        seed: report.scenario.seed,
        failed_at: report.failed_at,
        metrics: &report.metrics,
        solver: &report.solver,
        scenario: &report.scenario,
    };
    let mut metrics_json =
        serde_json::to_string_pretty(&metrics_file).map_err(|e| RunnerError::Parse(e.to_string()))?;
    metrics_json.push('\n');
    write(&metrics_path, &metrics_json)?;
    written.push(metrics_path);

    let band = report.scenario.comfort_band;
    let tracking_path = out_dir.join("plotdata_tracking.csv");
    let mut tracking = String::from(if band.is_some() {
        "k,t_s,y,r,band_lo,band_hi\n"
    } else {
        "k,t_s,y,r\n"
    });
    for s in &report.steps {
        match band {
            Some([lo, hi]) => tracking.push_str(&format!(
                "{},{},{},{},{},{}\n",
                s.k, s.t_s, s.y, s.r, lo, hi
            )),
            None => tracking.push_str(&format!("{},{},{},{}\n", s.k, s.t_s, s.y, s.r)),
        }
    }
    write(&tracking_path, &tracking)?;
    written.push(tracking_path);

    let input_path = out_dir.join("plotdata_input.csv");
    let mut input = String::from("k,t_s,u\n");
    for s in &report.steps {
        input.push_str(&format!("{},{},{}\n", s.k, s.t_s, s.u));
    }
    write(&input_path, &input)?;
    written.push(input_path);

    let timing_path = out_dir.join("timing.json");
    let mut timing_json = serde_json::to_string_pretty(&TimingFile {
        timing: &report.timing,
    })
    .map_err(|e| RunnerError::Parse(e.to_string()))?;
    timing_json.push('\n');
    write(&timing_path, &timing_json)?;
    written.push(timing_path);

    Ok(written)
}

pub fn trajectory_csv(steps: &[StepRecord]) -> String {
    let mut out = String::from("k,t_s,u,y,r,disturbed,slack\n");
    for s in steps {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            s.k, s.t_s, s.u, s.y, s.r, s.disturbed, s.slack
        ));
    }
    out
}

/// Columns parsed back from a `trajectory.csv`.
#[derive(Debug, Clone)]
pub struct TrajectoryColumns {
    pub t_s: Vec<f64>,
    pub u: Vec<f64>,
    pub y: Vec<f64>,
    pub r: Vec<f64>,
    pub disturbed: Vec<bool>,
    pub slack: Vec<f64>,
}

impl TrajectoryColumns {
    /// Sampling period implied by the time column.
    pub fn dt_s(&self) -> Result<f64, RunnerError> {
        if self.t_s.len() < 2 {
            return Err(RunnerError::Parse(
                "need at least two rows to infer the sampling period".into(),
            ));
        }
        Ok(self.t_s[1] - self.t_s[0])
    }
}

pub fn read_trajectory(path: &Path) -> Result<TrajectoryColumns, RunnerError> {
    let text = fs::read_to_string(path).map_err(|e| RunnerError::io(path, e))?;
    let mut lines = text.lines();
    match lines.next() {
        Some("k,t_s,u,y,r,disturbed,slack") => {}
        other => {
            return Err(RunnerError::Parse(format!(
                "unexpected trajectory header {other:?}"
            )))
        }
    }
    let mut cols = TrajectoryColumns {
        t_s: Vec::new(),
        u: Vec::new(),
        y: Vec::new(),
        r: Vec::new(),
        disturbed: Vec::new(),
        slack: Vec::new(),
    };
    for (idx, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(RunnerError::Parse(format!(
                "row {idx}: expected 7 fields, got {}",
                fields.len()
            )));
        }
        let num = |s: &str| -> Result<f64, RunnerError> {
            s.parse()
                .map_err(|_| RunnerError::Parse(format!("row {idx}: bad float '{s}'")))
        };
        cols.t_s.push(num(fields[1])?);
        cols.u.push(num(fields[2])?);
        cols.y.push(num(fields[3])?);
        cols.r.push(num(fields[4])?);
        cols.disturbed.push(fields[5].parse().map_err(|_| {
            RunnerError::Parse(format!("row {idx}: bad bool '{}'", fields[5]))
        })?);
        cols.slack.push(num(fields[6])?);
    }
    Ok(cols)
}

/// Recomputes the tracking metrics from a trajectory file; bit-identical
/// to the metrics computed during the run because the CSV floats round-
/// trip exactly and the arithmetic path is shared.
pub fn recompute_metrics(
    columns: &TrajectoryColumns,
    band: Option<(f64, f64)>,
) -> Result<Metrics, RunnerError> {
    crate::metrics::compute_metrics(
        &columns.y,
        &columns.r,
        &columns.u,
        columns.dt_s()?,
        band,
        &columns.disturbed,
    )
}
