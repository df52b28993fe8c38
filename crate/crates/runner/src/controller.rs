use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use loopbench_core::estimation::KalmanFilter;
use loopbench_core::mpc::{AdmmSettings, MpcController};
use loopbench_core::plant::{
    battery_step, build_thermal_model, thermal_predictor_model, BatteryParams, LtiModel,
    ThermalZoneParams,
};
use loopbench_core::smmpc::{
    build_signal_matrix, read_trajectory_csv, SmmpcConfig, SmmpcController,
};

use crate::scenario::{ControllerSpec, DataSpec, PlantSpec, Scenario};
use crate::RunnerError;

/// What the loop records about one controller decision.
pub struct ControlDecision {
    pub u_command: f64,
    pub iterations: usize,
    pub optimal: bool,
    pub slack: f64,
}

/// The simulated physical plant (the "truth" side of the loop).
pub enum TruthPlant {
    Thermal {
        model: LtiModel,
        ambient: Vec<f64>,
        params: ThermalZoneParams,
        pwm_slots: usize,
        temp_c: f64,
    },
    Battery {
        params: BatteryParams,
        dt_s: f64,
        soc: f64,
    },
}

impl TruthPlant {
    pub fn from_scenario(scenario: &Scenario) -> Result<Self, RunnerError> {
        match &scenario.plant {
            PlantSpec::Thermal {
                thermal_resistance,
                thermal_capacitance,
                heater_capacity_w,
                pwm_slots,
                initial_temp_c,
                ambient,
            } => {
                let ambient = ambient.realize(scenario.duration_steps.max(1), scenario.dt_s)?;
                let params = ThermalZoneParams {
                    thermal_resistance: *thermal_resistance,
                    thermal_capacitance: *thermal_capacitance,
                    heater_capacity: *heater_capacity_w,
                    ambient_temp_profile: ambient.clone(),
                };
                let model = build_thermal_model(&params, scenario.dt_s)?;
                Ok(TruthPlant::Thermal {
                    model,
                    ambient,
                    params,
                    pwm_slots: *pwm_slots,
                    temp_c: *initial_temp_c,
                })
            }
            PlantSpec::Battery {
                energy_capacity_wh,
                charge_efficiency,
                discharge_efficiency,
                power_min_w,
                power_max_w,
                initial_soc,
            } => Ok(TruthPlant::Battery {
                params: BatteryParams {
                    energy_capacity_wh: *energy_capacity_wh,
                    charge_efficiency: *charge_efficiency,
                    discharge_efficiency: *discharge_efficiency,
                    power_min_w: *power_min_w,
                    power_max_w: *power_max_w,
                },
                dt_s: scenario.dt_s,
                soc: *initial_soc,
            }),
        }
    }

    pub fn output(&self) -> f64 {
        match self {
            TruthPlant::Thermal { temp_c, .. } => *temp_c,
            TruthPlant::Battery { soc, .. } => *soc,
        }
    }

    pub fn input_bounds(&self) -> (f64, f64) {
        match self {
            TruthPlant::Thermal { params, .. } => (0.0, params.heater_capacity),
            TruthPlant::Battery { params, .. } => (params.power_min_w, params.power_max_w),
        }
    }

    pub fn pwm_slots(&self) -> Option<usize> {
        match self {
            TruthPlant::Thermal { pwm_slots, .. } => Some(*pwm_slots),
            TruthPlant::Battery { .. } => None,
        }
    }

    /// Advances the plant one step under the realized input and an
    /// additive state offset (window-opening events).
    pub fn step(&mut self, u_applied: f64, k: usize, state_offset: f64) -> Result<(), RunnerError> {
        match self {
            TruthPlant::Thermal {
                model,
                ambient,
                temp_c,
                ..
            } => {
                let amb = ambient[k.min(ambient.len() - 1)];
                let x = DVector::from_element(1, *temp_c);
                let u = DVector::from_vec(vec![u_applied, amb]);
                let offset = DVector::from_element(1, state_offset);
                let (x_next, _) = model.step(&x, &u, Some(&offset))?;
                *temp_c = x_next[0];
                Ok(())
            }
            TruthPlant::Battery { params, dt_s, soc } => {
                *soc = battery_step(params, *soc, u_applied, *dt_s) + state_offset;
                Ok(())
            }
        }
    }
}

/// Controller half of the loop: either MPC with a Kalman filter or
/// SMM-PC with raw measurement buffers.
pub enum LoopController {
    Mpc {
        ctrl: MpcController,
        kf: KalmanFilter,
        u_prev: DVector<f64>,
        primed: bool,
    },
    Smmpc {
        ctrl: SmmpcController,
        t_ini: usize,
        /// Operating point subtracted from inputs/outputs so the linear
        /// combination machinery sees deviation data.
        base_u: f64,
        base_y: f64,
        u_hist: Vec<f64>,
        y_hist: Vec<f64>,
    },
}

fn solver_settings() -> AdmmSettings {
    AdmmSettings::default()
}

/// Thermal operating point: steady state holding the band (or reference)
/// at the mean ambient.
fn thermal_operating_point(
    params: &ThermalZoneParams,
    target_temp: f64,
) -> (f64, f64) {
    let amb = params.ambient_mean();
    let u = ((target_temp - amb) / params.thermal_resistance)
        .clamp(0.0, params.heater_capacity);
    let y = amb + params.thermal_resistance * u;
    (u, y)
}

impl LoopController {
    pub fn from_scenario(
        scenario: &Scenario,
        plant: &TruthPlant,
        first_measurement: f64,
    ) -> Result<Self, RunnerError> {
        let (u_lo, u_hi) = plant.input_bounds();
        let u_scale = u_lo.abs().max(u_hi.abs()).max(1.0);
        match &scenario.controller {
            ControllerSpec::Mpc {
                output_weight,
                input_weight,
                slack_weight,
                kf_process_noise,
                kf_ambient_process_noise,
            } => {
                let (predictor, x0, p0, q_proc) = match plant {
                    TruthPlant::Thermal { params, .. } => {
                        let predictor = thermal_predictor_model(params, scenario.dt_s)?;
                        let x0 = DVector::from_vec(vec![first_measurement, params.ambient_mean()]);
                        let p0 = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 25.0]));
                        let q = DMatrix::from_diagonal(&DVector::from_vec(vec![
                            *kf_process_noise,
                            *kf_ambient_process_noise,
                        ]));
                        (predictor, x0, p0, q)
                    }
                    TruthPlant::Battery { params, dt_s, .. } => {
                        let ideal = BatteryParams {
                            charge_efficiency: 1.0,
                            discharge_efficiency: 1.0,
                            ..params.clone()
                        };
                        let predictor =
                            loopbench_core::plant::build_battery_model(&ideal, *dt_s)?;
                        let x0 = DVector::from_element(1, first_measurement);
                        let p0 = DMatrix::from_element(1, 1, 1.0);
                        let q = DMatrix::from_element(1, 1, *kf_process_noise);
                        (predictor, x0, p0, q)
                    }
                };
                let r_meas =
                    DMatrix::from_element(1, 1, (scenario.noise_std.powi(2)).max(1e-8));
                let kf = KalmanFilter::new(predictor.clone(), q_proc, r_meas, x0, p0)?;

                let y_box = match scenario.comfort_band {
                    Some([lo, hi]) => (
                        DVector::from_element(1, lo + scenario.comfort_margin),
                        DVector::from_element(1, hi - scenario.comfort_margin),
                    ),
                    None => match plant {
                        // SOC is physically confined; keep the plan inside.
                        TruthPlant::Battery { .. } => (
                            DVector::from_element(1, 0.0),
                            DVector::from_element(1, 100.0),
                        ),
                        TruthPlant::Thermal { .. } => (
                            DVector::from_element(1, f64::NEG_INFINITY),
                            DVector::from_element(1, f64::INFINITY),
                        ),
                    },
                };
                let ctrl = MpcController::new(
                    predictor,
                    scenario.horizon,
                    DMatrix::from_element(1, 1, *output_weight),
                    DMatrix::from_element(1, 1, *input_weight / (u_scale * u_scale)),
                    (
                        DVector::from_element(1, u_lo),
                        DVector::from_element(1, u_hi),
                    ),
                    y_box,
                    *slack_weight,
                    solver_settings(),
                )?;
                let m = ctrl.model().n_inputs();
                Ok(LoopController::Mpc {
                    ctrl,
                    kf,
                    u_prev: DVector::zeros(m),
                    primed: false,
                })
            }
            ControllerSpec::Smmpc {
                output_weight,
                input_weight,
                t_ini,
                lambda_g,
                data,
            } => {
                let (base_u, base_y) = match plant {
                    TruthPlant::Thermal { params, .. } => {
                        let target = match scenario.comfort_band {
                            Some([lo, _]) => lo + scenario.comfort_margin.max(0.3),
                            None => first_measurement,
                        };
                        thermal_operating_point(params, target)
                    }
                    TruthPlant::Battery { .. } => (0.0, first_measurement),
                };
                let (u_data, y_data) = match data {
                    DataSpec::Generated { length, excitation } => generate_offline_data(
                        scenario, plant, *length, *excitation, base_u, base_y,
                    )?,
                    DataSpec::File { path } => {
                        let (u, y) = read_trajectory_csv(path)?;
                        // File data is absolute; shift to deviations.
                        (u.map(|v| v - base_u), y.map(|v| v - base_y))
                    }
                };
                let sm = build_signal_matrix(&u_data, &y_data, *t_ini, scenario.horizon)?;
                let cfg = SmmpcConfig {
                    t_ini: *t_ini,
                    horizon: scenario.horizon,
                    q_output: DMatrix::from_element(1, 1, *output_weight),
                    q_input: DMatrix::from_element(1, 1, *input_weight / (u_scale * u_scale)),
                    lambda_g: *lambda_g,
                    lambda_y: f64::INFINITY,
                    noise_variance: 0.0,
                    u_lower: DVector::from_element(1, u_lo - base_u),
                    u_upper: DVector::from_element(1, u_hi - base_u),
                }
                .with_noise_variance(scenario.noise_std.powi(2));
                let ctrl = SmmpcController::new(sm, cfg, solver_settings())?;
                Ok(LoopController::Smmpc {
                    ctrl,
                    t_ini: *t_ini,
                    base_u,
                    base_y,
                    u_hist: Vec::new(),
                    y_hist: Vec::new(),
                })
            }
        }
    }

    /// One decision. `y_meas` is this step's noisy measurement,
    /// `r_window` the reference over the horizon (absolute units),
    /// `u_lo`/`u_hi` the plant input bounds.
    pub fn decide(
        &mut self,
        y_meas: f64,
        r_window: &[f64],
        u_lo: f64,
        u_hi: f64,
    ) -> Result<ControlDecision, RunnerError> {
        match self {
            LoopController::Mpc {
                ctrl,
                kf,
                u_prev,
                primed,
            } => {
                if *primed {
                    *kf = kf.predict(u_prev)?;
                    *kf = kf.update_joseph(&DVector::from_element(1, y_meas))?;
                } else {
                    // First step: the filter was initialized from this
                    // measurement; a gain update would double-count it.
                    *primed = true;
                }
                let window: Vec<DVector<f64>> = r_window
                    .iter()
                    .map(|&r| DVector::from_element(1, r))
                    .collect();
                let x_hat = kf.x_hat.clone();
                let step = ctrl.step(&x_hat, &window)?;
                *u_prev = step.u0.clone();
                Ok(ControlDecision {
                    u_command: step.u0[0].clamp(u_lo, u_hi),
                    iterations: step.solution.iterations,
                    optimal: !step.used_fallback,
                    slack: step.max_slack,
                })
            }
            LoopController::Smmpc {
                ctrl,
                t_ini,
                base_u,
                base_y,
                u_hist,
                y_hist,
            } => {
                y_hist.push(y_meas - *base_y);
                // Warm-up: hold the operating point until one past window
                // of completed steps exists.
                if u_hist.len() < *t_ini {
                    let u = base_u.clamp(u_lo, u_hi);
                    u_hist.push(u - *base_u);
                    return Ok(ControlDecision {
                        u_command: u,
                        iterations: 0,
                        optimal: true,
                        slack: 0.0,
                    });
                }
                // Past window are the last t_ini completed (u, y) pairs:
                // the measurement just pushed belongs to the not-yet-
                // decided step and stays out of the window.
                let n_u = u_hist.len();
                let n_y = y_hist.len();
                let u_ini: Vec<DVector<f64>> = u_hist[n_u - *t_ini..]
                    .iter()
                    .map(|&v| DVector::from_element(1, v))
                    .collect();
                let y_ini: Vec<DVector<f64>> = y_hist[n_y - 1 - *t_ini..n_y - 1]
                    .iter()
                    .map(|&v| DVector::from_element(1, v))
                    .collect();
                let window: Vec<DVector<f64>> = r_window
                    .iter()
                    .map(|&r| DVector::from_element(1, r - *base_y))
                    .collect();
                let step = ctrl.step(&u_ini, &y_ini, &window)?;
                let u = (step.u0[0] + *base_u).clamp(u_lo, u_hi);
                u_hist.push(u - *base_u);
                Ok(ControlDecision {
                    u_command: u,
                    iterations: step.solution.iterations,
                    optimal: true,
                    slack: 0.0,
                })
            }
        }
    }
}

/// Seeded excitation run against the truth plant at a constant (mean)
/// ambient, recorded as deviations from the operating point.
fn generate_offline_data(
    scenario: &Scenario,
    plant: &TruthPlant,
    length: usize,
    excitation: f64,
    base_u: f64,
    base_y: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>), RunnerError> {
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed ^ 0x5eed_da7a);
    let (u_lo, u_hi) = plant.input_bounds();
    let mut u_rec = Vec::with_capacity(length);
    let mut y_rec = Vec::with_capacity(length);
    match plant {
        TruthPlant::Thermal { params, .. } => {
            let amb = params.ambient_mean();
            let mut frozen = params.clone();
            frozen.ambient_temp_profile = vec![amb];
            let model = build_thermal_model(&frozen, scenario.dt_s)?;
            let mut temp = base_y;
            for _ in 0..length {
                let u = (base_u + rng.random_range(-excitation..excitation)).clamp(u_lo, u_hi);
                u_rec.push(u - base_u);
                y_rec.push(temp - base_y);
                let x = DVector::from_element(1, temp);
                let uv = DVector::from_vec(vec![u, amb]);
                let (x_next, _) = model.step(&x, &uv, None)?;
                temp = x_next[0];
            }
        }
        TruthPlant::Battery { params, dt_s, .. } => {
            let mut soc = base_y;
            for _ in 0..length {
                let u = rng.random_range(-excitation..excitation).clamp(u_lo, u_hi);
                u_rec.push(u);
                y_rec.push(soc - base_y);
                soc = battery_step(params, soc, u, *dt_s);
            }
        }
    }
    Ok((
        DMatrix::from_fn(1, length, |_, c| u_rec[c]),
        DMatrix::from_fn(1, length, |_, c| y_rec[c]),
    ))
}
