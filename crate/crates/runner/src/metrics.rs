use serde::{Deserialize, Serialize};

use crate::RunnerError;

/// Tracking and comfort metrics, all recomputable from the trajectory
/// columns alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Mean of `y - r`.
    pub mean_error: f64,
    /// Root-mean-square of `y - r`.
    pub rmse: f64,
    /// Output samples outside the comfort band (zero when no band).
    pub comfort_violation_steps: usize,
    /// Violating samples attributed to disturbance events: a consecutive
    /// violation run counts as disturbance-caused when its first sample
    /// is disturbance-affected, which also attributes the recovery tail
    /// after an event ends.
    pub violation_steps_during_disturbance: usize,
    /// Positive input energy, Wh: sum of max(u, 0) * dt / 3600.
    pub energy_used_wh: f64,
}

/// Computes metrics over aligned per-step series. `disturbed[k]` marks
/// samples whose preceding transition carried an injected offset.
pub fn compute_metrics(
    y: &[f64],
    r: &[f64],
    u: &[f64],
    dt_s: f64,
    band: Option<(f64, f64)>,
    disturbed: &[bool],
) -> Result<Metrics, RunnerError> {
    let n = y.len();
    if r.len() != n || u.len() != n || disturbed.len() != n {
        return Err(RunnerError::Scenario(format!(
            "metric series lengths differ: y {n}, r {}, u {}, disturbed {}",
            r.len(),
            u.len(),
            disturbed.len()
        )));
    }
    if n == 0 {
        return Err(RunnerError::Scenario(
            "cannot compute metrics over an empty trajectory".into(),
        ));
    }

    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut energy_j = 0.0;
    for k in 0..n {
        let err = y[k] - r[k];
        sum += err;
        sum_sq += err * err;
        energy_j += u[k].max(0.0) * dt_s;
    }

    let mut violations = 0usize;
    let mut attributed = 0usize;
    if let Some((lo, hi)) = band {
        let violating: Vec<bool> = y.iter().map(|&v| v < lo || v > hi).collect();
        let mut k = 0;
        while k < n {
            if violating[k] {
                let run_start = k;
                while k < n && violating[k] {
                    k += 1;
                }
                let run_len = k - run_start;
                violations += run_len;
                if disturbed[run_start] {
                    attributed += run_len;
                }
            } else {
                k += 1;
            }
        }
    }

    Ok(Metrics {
        mean_error: sum / n as f64,
        rmse: (sum_sq / n as f64).sqrt(),
        comfort_violation_steps: violations,
        violation_steps_during_disturbance: attributed,
        energy_used_wh: energy_j / 3600.0,
    })
}
