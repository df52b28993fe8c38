use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use loopbench_core::plant::{pwm_encode, pwm_realized_power};

use crate::controller::{LoopController, TruthPlant};
use crate::metrics::{compute_metrics, Metrics};
use crate::scenario::Scenario;
use crate::RunnerError;

/// One row of the recorded closed-loop trajectory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepRecord {
    pub k: usize,
    pub t_s: f64,
    /// Realized input (post-PWM for the thermal plant), W.
    pub u: f64,
    /// True plant output (noise affects only what the controller sees).
    pub y: f64,
    pub r: f64,
    /// Whether the transition into this sample carried an injected offset.
    pub disturbed: bool,
    /// Largest planned output-constraint slack at this step.
    pub slack: f64,
    #[serde(skip)]
    pub iterations: usize,
    #[serde(skip)]
    pub optimal: bool,
    #[serde(skip)]
    pub wall_ns: u64,
}

/// Deterministic solver aggregates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverStats {
    pub iterations_min: usize,
    pub iterations_mean: f64,
    pub iterations_max: usize,
    pub fallback_steps: usize,
}

/// Wall-clock aggregates; inherently non-deterministic, reported apart
/// from the byte-stable metrics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TimingStats {
    pub step_wall_ns_min: u64,
    pub step_wall_ns_mean: f64,
    pub step_wall_ns_max: u64,
    pub total_wall_s: f64,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub scenario: Scenario,
    pub steps: Vec<StepRecord>,
    pub metrics: Metrics,
    pub solver: SolverStats,
    pub timing: TimingStats,
    /// Step at which the controller failed, if it did; the trajectory up
    /// to that step is still recorded.
    pub failed_at: Option<usize>,
}

/// Runs one scenario to completion. Fully deterministic for a fixed seed:
/// the measurement-noise stream and any generated offline data derive
/// from `scenario.seed` alone.
pub fn run_scenario(scenario: &Scenario) -> Result<RunReport, RunnerError> {
    scenario.validate()?;
    let total_start = Instant::now();

    let mut plant = TruthPlant::from_scenario(scenario)?;
    let reference = scenario
        .reference
        .realize(scenario.duration_steps + scenario.horizon, scenario.dt_s)?;

    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let noise = Normal::new(0.0, 1.0).expect("unit normal");

    let first_meas = plant.output() + scenario.noise_std * noise.sample(&mut rng);
    let mut controller = LoopController::from_scenario(scenario, &plant, first_meas)?;
    let (u_lo, u_hi) = plant.input_bounds();
    let pwm_slots = plant.pwm_slots();

    let mut steps: Vec<StepRecord> = Vec::with_capacity(scenario.duration_steps);
    let mut failed_at = None;
    let mut prev_transition_disturbed = false;

    for k in 0..scenario.duration_steps {
        let y_true = plant.output();
        let y_meas = if k == 0 {
            first_meas
        } else {
            y_true + scenario.noise_std * noise.sample(&mut rng)
        };
        let r_window = &reference[k..k + scenario.horizon];

        let step_start = Instant::now();
        let decision = match controller.decide(y_meas, r_window, u_lo, u_hi) {
            Ok(d) => d,
            Err(_) => {
                failed_at = Some(k);
                break;
            }
        };
        let wall_ns = step_start.elapsed().as_nanos() as u64;

        // Actuation: the thermal command goes through PWM quantization.
        let u_applied = match pwm_slots {
            Some(slots) => {
                let schedule = pwm_encode(decision.u_command.clamp(0.0, u_hi), u_hi, slots)?;
                pwm_realized_power(&schedule, u_hi)
            }
            None => decision.u_command,
        };

        let offset: f64 = scenario
            .disturbances
            .iter()
            .filter(|w| k >= w.start_step && k < w.end_step)
            .map(|w| w.state_offset_per_step)
            .sum();

        steps.push(StepRecord {
            k,
            t_s: k as f64 * scenario.dt_s,
            u: u_applied,
            y: y_true,
            r: reference[k],
            disturbed: prev_transition_disturbed,
            slack: decision.slack,
            iterations: decision.iterations,
            optimal: decision.optimal,
            wall_ns,
        });

        plant.step(u_applied, k, offset)?;
        prev_transition_disturbed = offset != 0.0;
    }

    let metrics = metrics_of(scenario, &steps)?;
    let solver = solver_stats(&steps);
    let timing = timing_stats(&steps, total_start.elapsed().as_secs_f64());

    Ok(RunReport {
        scenario: scenario.clone(),
        steps,
        metrics,
        solver,
        timing,
        failed_at,
    })
}

pub(crate) fn metrics_of(scenario: &Scenario, steps: &[StepRecord]) -> Result<Metrics, RunnerError> {
    let y: Vec<f64> = steps.iter().map(|s| s.y).collect();
    let r: Vec<f64> = steps.iter().map(|s| s.r).collect();
    let u: Vec<f64> = steps.iter().map(|s| s.u).collect();
    let disturbed: Vec<bool> = steps.iter().map(|s| s.disturbed).collect();
    compute_metrics(
        &y,
        &r,
        &u,
        scenario.dt_s,
        scenario.comfort_band.map(|[lo, hi]| (lo, hi)),
        &disturbed,
    )
}

fn solver_stats(steps: &[StepRecord]) -> SolverStats {
    let mut min = usize::MAX;
    let mut max = 0usize;
    let mut sum = 0usize;
    let mut fallbacks = 0usize;
    for s in steps {
        min = min.min(s.iterations);
        max = max.max(s.iterations);
        sum += s.iterations;
        if !s.optimal {
            fallbacks += 1;
        }
    }
    SolverStats {
        iterations_min: if steps.is_empty() { 0 } else { min },
        iterations_mean: if steps.is_empty() {
            0.0
        } else {
            sum as f64 / steps.len() as f64
        },
        iterations_max: max,
        fallback_steps: fallbacks,
    }
}

fn timing_stats(steps: &[StepRecord], total_wall_s: f64) -> TimingStats {
    let mut min = u64::MAX;
    let mut max = 0u64;
    let mut sum = 0u128;
    for s in steps {
        min = min.min(s.wall_ns);
        max = max.max(s.wall_ns);
        sum += s.wall_ns as u128;
    }
    TimingStats {
        step_wall_ns_min: if steps.is_empty() { 0 } else { min },
        step_wall_ns_mean: if steps.is_empty() {
            0.0
        } else {
            sum as f64 / steps.len() as f64
        },
        step_wall_ns_max: max,
        total_wall_s,
    }
}
