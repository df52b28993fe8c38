use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::RunnerError;

pub const SCHEMA_VERSION: u32 = 1;

/// One closed-loop experiment, fully resolved and serializable to TOML.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    /// Seed for measurement noise and offline-data generation.
    pub seed: u64,
    /// Sampling period, seconds.
    pub dt_s: f64,
    pub duration_steps: usize,
    /// Prediction horizon for both controllers, steps.
    pub horizon: usize,
    /// Standard deviation of the output measurement noise.
    pub noise_std: f64,
    /// Output comfort band `[lo, hi]` used for violation counting.
    #[serde(default)]
    pub comfort_band: Option<[f64; 2]>,
    /// Back-off applied to the band inside the controller, so riding the
    /// constraint leaves headroom for noise and quantization.
    #[serde(default)]
    pub comfort_margin: f64,
    pub plant: PlantSpec,
    pub controller: ControllerSpec,
    pub reference: SignalSpec,
    #[serde(default)]
    pub disturbances: Vec<DisturbanceWindow>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlantSpec {
    Thermal {
        thermal_resistance: f64,
        thermal_capacitance: f64,
        heater_capacity_w: f64,
        pwm_slots: usize,
        initial_temp_c: f64,
        ambient: SignalSpec,
    },
    Battery {
        energy_capacity_wh: f64,
        charge_efficiency: f64,
        discharge_efficiency: f64,
        power_min_w: f64,
        power_max_w: f64,
        initial_soc: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ControllerSpec {
    Mpc {
        /// Weight on squared tracking error.
        output_weight: f64,
        /// Weight on the squared input, expressed per input normalized by
        /// its largest bound magnitude.
        input_weight: f64,
        slack_weight: f64,
        /// Process-noise variance for the estimator's physical state.
        kf_process_noise: f64,
        /// Process-noise variance for the estimated ambient state
        /// (thermal predictor only).
        kf_ambient_process_noise: f64,
    },
    Smmpc {
        output_weight: f64,
        /// Same normalization as the MPC input weight.
        input_weight: f64,
        t_ini: usize,
        lambda_g: f64,
        data: DataSpec,
    },
}

/// Where the offline trajectory library comes from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSpec {
    /// Excite the plant around its operating point with seeded uniform
    /// inputs of the given half-range.
    Generated { length: usize, excitation: f64 },
    /// Load a trajectory CSV (`k,u_0..,y_0..` schema).
    File { path: PathBuf },
}

/// Scalar signal over steps.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SignalSpec {
    Constant {
        value: f64,
    },
    Sinusoid {
        amplitude: f64,
        period_s: f64,
        offset: f64,
    },
    /// Plain text, one value per line; `#` lines are comments. Shorter
    /// files are padded by holding the last value.
    File {
        path: PathBuf,
    },
}

impl SignalSpec {
    /// Materializes `steps` values sampled every `dt_s`.
    pub fn realize(&self, steps: usize, dt_s: f64) -> Result<Vec<f64>, RunnerError> {
        match self {
            SignalSpec::Constant { value } => Ok(vec![*value; steps]),
            SignalSpec::Sinusoid {
                amplitude,
                period_s,
                offset,
            } => {
                if !(*period_s > 0.0) {
                    return Err(RunnerError::Scenario(
                        "sinusoid period must be positive".into(),
                    ));
                }
                Ok((0..steps)
                    .map(|k| {
                        offset
                            + amplitude
                                * (2.0 * std::f64::consts::PI * k as f64 * dt_s / period_s).sin()
                    })
                    .collect())
            }
            SignalSpec::File { path } => {
                let text = fs::read_to_string(path).map_err(|e| RunnerError::io(path, e))?;
                let mut values = Vec::new();
                for (idx, line) in text.lines().enumerate() {
                    let line = line.trim();
                    if line.is_empty() || line.starts_with('#') {
                        continue;
                    }
                    values.push(line.parse::<f64>().map_err(|_| {
                        RunnerError::Parse(format!(
                            "{}:{}: bad float '{line}'",
                            path.display(),
                            idx + 1
                        ))
                    })?);
                }
                if values.is_empty() {
                    return Err(RunnerError::Scenario(format!(
                        "reference file {} has no values",
                        path.display()
                    )));
                }
                let last = *values.last().expect("non-empty");
                values.resize(steps, last);
                values.truncate(steps);
                Ok(values)
            }
        }
    }

    pub fn mean_over(&self, steps: usize, dt_s: f64) -> Result<f64, RunnerError> {
        let v = self.realize(steps, dt_s)?;
        Ok(v.iter().sum::<f64>() / v.len() as f64)
    }
}

/// Additive state offset active on transitions
/// `start_step <= k < end_step`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DisturbanceWindow {
    pub start_step: usize,
    pub end_step: usize,
    pub state_offset_per_step: f64,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), RunnerError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(RunnerError::Scenario(format!(
                "schema version {} unsupported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if !(self.dt_s > 0.0) {
            return Err(RunnerError::Scenario("dt_s must be positive".into()));
        }
        if self.horizon < 1 {
            return Err(RunnerError::Scenario("horizon must be at least 1".into()));
        }
        if self.duration_steps < self.horizon {
            return Err(RunnerError::Scenario(format!(
                "duration ({} steps) must cover at least one horizon ({})",
                self.duration_steps, self.horizon
            )));
        }
        if !(self.noise_std >= 0.0) {
            return Err(RunnerError::Scenario("noise_std must be >= 0".into()));
        }
        if let Some([lo, hi]) = self.comfort_band {
            if !(lo < hi) {
                return Err(RunnerError::Scenario(format!(
                    "comfort band [{lo}, {hi}] must satisfy lo < hi"
                )));
            }
            if self.comfort_margin < 0.0 || 2.0 * self.comfort_margin >= hi - lo {
                return Err(RunnerError::Scenario(format!(
                    "comfort margin {} incompatible with band [{lo}, {hi}]",
                    self.comfort_margin
                )));
            }
        }
        for (i, w) in self.disturbances.iter().enumerate() {
            if w.start_step >= w.end_step || w.end_step > self.duration_steps {
                return Err(RunnerError::Scenario(format!(
                    "disturbance {i} window [{}, {}) outside 0..{}",
                    w.start_step, w.end_step, self.duration_steps
                )));
            }
            if !w.state_offset_per_step.is_finite() {
                return Err(RunnerError::Scenario(format!(
                    "disturbance {i} offset must be finite"
                )));
            }
        }
        match &self.plant {
            PlantSpec::Thermal {
                thermal_resistance,
                thermal_capacitance,
                heater_capacity_w,
                pwm_slots,
                ..
            } => {
                if !(*thermal_resistance > 0.0)
                    || !(*thermal_capacitance > 0.0)
                    || !(*heater_capacity_w > 0.0)
                {
                    return Err(RunnerError::Scenario(
                        "thermal parameters must be positive".into(),
                    ));
                }
                if *pwm_slots < 1 {
                    return Err(RunnerError::Scenario("pwm_slots must be >= 1".into()));
                }
            }
            PlantSpec::Battery {
                energy_capacity_wh,
                charge_efficiency,
                discharge_efficiency,
                power_min_w,
                power_max_w,
                initial_soc,
            } => {
                if !(*energy_capacity_wh > 0.0) {
                    return Err(RunnerError::Scenario(
                        "battery capacity must be positive".into(),
                    ));
                }
                for eta in [charge_efficiency, discharge_efficiency] {
                    if !(*eta > 0.0 && *eta <= 1.0) {
                        return Err(RunnerError::Scenario(
                            "efficiencies must be in (0, 1]".into(),
                        ));
                    }
                }
                if !(*power_min_w < 0.0 && *power_max_w > 0.0) {
                    return Err(RunnerError::Scenario(
                        "power limits must satisfy min < 0 < max".into(),
                    ));
                }
                if !(0.0..=100.0).contains(initial_soc) {
                    return Err(RunnerError::Scenario(
                        "initial SOC must be within [0, 100]".into(),
                    ));
                }
            }
        }
        match &self.controller {
            ControllerSpec::Mpc {
                output_weight,
                input_weight,
                slack_weight,
                kf_process_noise,
                kf_ambient_process_noise,
            } => {
                for (name, v) in [
                    ("output_weight", output_weight),
                    ("input_weight", input_weight),
                    ("slack_weight", slack_weight),
                    ("kf_process_noise", kf_process_noise),
                    ("kf_ambient_process_noise", kf_ambient_process_noise),
                ] {
                    if !(*v >= 0.0) || !v.is_finite() {
                        return Err(RunnerError::Scenario(format!(
                            "{name} must be finite and nonnegative"
                        )));
                    }
                }
            }
            ControllerSpec::Smmpc {
                output_weight,
                input_weight,
                t_ini,
                lambda_g,
                data,
            } => {
                if !(*output_weight >= 0.0) || !(*input_weight >= 0.0) || !(*lambda_g >= 0.0) {
                    return Err(RunnerError::Scenario(
                        "smmpc weights must be nonnegative".into(),
                    ));
                }
                if *t_ini < 1 {
                    return Err(RunnerError::Scenario("t_ini must be >= 1".into()));
                }
                if let DataSpec::Generated { length, excitation } = data {
                    if *length < t_ini + self.horizon {
                        return Err(RunnerError::Scenario(format!(
                            "generated data length {length} shorter than one window"
                        )));
                    }
                    if !(*excitation > 0.0) {
                        return Err(RunnerError::Scenario(
                            "excitation must be positive".into(),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, RunnerError> {
        let text = fs::read_to_string(path).map_err(|e| RunnerError::io(path, e))?;
        let scenario: Scenario =
            toml::from_str(&text).map_err(|e| RunnerError::Parse(format!("{e}")))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn save(&self, path: &Path) -> Result<(), RunnerError> {
        let text = toml::to_string_pretty(self).map_err(|e| RunnerError::Parse(format!("{e}")))?;
        fs::write(path, text).map_err(|e| RunnerError::io(path, e))?;
        Ok(())
    }

    /// Swaps in the default controller block of the other kind; used by
    /// the demo command's `--controller` flag.
    pub fn with_controller_kind(mut self, kind: &str) -> Result<Self, RunnerError> {
        let is_thermal = matches!(self.plant, PlantSpec::Thermal { .. });
        self.controller = match kind {
            "mpc" => default_mpc_controller(is_thermal),
            "smmpc" => default_smmpc_controller(is_thermal),
            other => {
                return Err(RunnerError::Scenario(format!(
                    "unknown controller kind '{other}' (expected mpc or smmpc)"
                )))
            }
        };
        self.validate()?;
        Ok(self)
    }
}

fn default_mpc_controller(is_thermal: bool) -> ControllerSpec {
    ControllerSpec::Mpc {
        output_weight: if is_thermal { 0.0 } else { 1.0 },
        input_weight: if is_thermal { 1.0 } else { 1e-4 },
        slack_weight: 1e4,
        // Large enough that the filter keeps correcting for the built-in
        // predictor mismatch (unit-efficiency battery model, PWM
        // quantization) instead of trusting the model open loop.
        kf_process_noise: if is_thermal { 1e-3 } else { 1e-2 },
        kf_ambient_process_noise: 0.02,
    }
}

fn default_smmpc_controller(is_thermal: bool) -> ControllerSpec {
    ControllerSpec::Smmpc {
        output_weight: 1.0,
        input_weight: 1e-4,
        t_ini: 4,
        lambda_g: 1e-1,
        data: DataSpec::Generated {
            length: 200,
            excitation: if is_thermal { 1200.0 } else { 6000.0 },
        },
    }
}

/// Space-heating case: minimize heating energy inside a comfort band,
/// with PWM valve actuation and window-opening disturbances.
pub fn case1_heating() -> Scenario {
    Scenario {
        schema_version: SCHEMA_VERSION,
        name: "case1_heating".into(),
        seed: 42,
        dt_s: 900.0,
        duration_steps: 192, // 48 h at 15 min
        horizon: 24,
        noise_std: 0.05,
        comfort_band: Some([20.0, 24.0]),
        comfort_margin: 0.3,
        plant: PlantSpec::Thermal {
            thermal_resistance: 0.01,
            thermal_capacitance: 1.0e6,
            heater_capacity_w: 4000.0,
            pwm_slots: 15,
            initial_temp_c: 21.0,
            ambient: SignalSpec::Sinusoid {
                amplitude: 3.0,
                period_s: 86_400.0,
                offset: 5.0,
            },
        },
        controller: default_mpc_controller(true),
        // Only used directly by the tracking (SMM-PC) variant; the MPC
        // variant plans against the band with zero output weight.
        reference: SignalSpec::Constant { value: 20.6 },
        disturbances: vec![
            DisturbanceWindow {
                start_step: 56,
                end_step: 60,
                state_offset_per_step: -2.0,
            },
            DisturbanceWindow {
                start_step: 140,
                end_step: 143,
                state_offset_per_step: -2.5,
            },
        ],
    }
}

/// Battery SOC tracking of a sinusoidal reference over 24 h.
pub fn case2_battery() -> Scenario {
    Scenario {
        schema_version: SCHEMA_VERSION,
        name: "case2_battery".into(),
        seed: 42,
        dt_s: 900.0,
        duration_steps: 96, // 24 h at 15 min
        horizon: 24,
        noise_std: 0.05,
        comfort_band: None,
        comfort_margin: 0.0,
        plant: PlantSpec::Battery {
            energy_capacity_wh: 96_000.0,
            charge_efficiency: 0.95,
            discharge_efficiency: 0.95,
            power_min_w: -20_000.0,
            power_max_w: 20_000.0,
            initial_soc: 50.0,
        },
        controller: default_mpc_controller(false),
        reference: SignalSpec::Sinusoid {
            amplitude: 20.0,
            period_s: 86_400.0,
            offset: 50.0,
        },
        disturbances: vec![],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        case1_heating().validate().unwrap();
        case2_battery().validate().unwrap();
    }

    #[test]
    fn toml_round_trip_preserves_the_scenario() {
        let dir = std::env::temp_dir().join("loopbench-scenario");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("case1.toml");
        let scenario = case1_heating();
        scenario.save(&path).unwrap();
        let loaded = Scenario::load(&path).unwrap();
        assert_eq!(loaded.name, scenario.name);
        assert_eq!(loaded.duration_steps, scenario.duration_steps);
        assert_eq!(loaded.disturbances.len(), 2);
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn invalid_windows_are_rejected() {
        let mut s = case1_heating();
        s.disturbances[0].end_step = 500;
        assert!(s.validate().is_err());
        let mut s = case1_heating();
        s.duration_steps = 4;
        assert!(s.validate().is_err());
    }

    #[test]
    fn controller_swap_produces_the_other_kind() {
        let s = case2_battery().with_controller_kind("smmpc").unwrap();
        assert!(matches!(s.controller, ControllerSpec::Smmpc { .. }));
        assert!(case2_battery().with_controller_kind("pid").is_err());
    }

    #[test]
    fn sinusoid_signal_matches_closed_form() {
        let spec = SignalSpec::Sinusoid {
            amplitude: 2.0,
            period_s: 4.0,
            offset: 1.0,
        };
        let v = spec.realize(4, 1.0).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-12);
        assert!((v[1] - 3.0).abs() < 1e-12);
        assert!((v[2] - 1.0).abs() < 1e-9);
        assert!((v[3] + 1.0).abs() < 1e-9);
    }

    #[test]
    fn file_signal_reads_and_pads() {
        let dir = std::env::temp_dir().join("loopbench-scenario-sig");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("ref.txt");
        std::fs::write(&path, "# header\n1.5\n2.5\n").unwrap();
        let spec = SignalSpec::File { path: path.clone() };
        let v = spec.realize(4, 1.0).unwrap();
        assert_eq!(v, vec![1.5, 2.5, 2.5, 2.5]);
        std::fs::remove_file(&path).ok();
    }
}
