use nalgebra::DMatrix;

use super::lti::{discretize_zoh, LtiModel};
use super::ModelError;

/// First-order RC thermal zone: `dT/dt = (T_amb - T)/(RC) + u/C`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermalZoneParams {
    /// K/W. May be infinite (adiabatic zone).
    pub thermal_resistance: f64,
    /// J/K.
    pub thermal_capacitance: f64,
    /// Maximum heating power, W.
    pub heater_capacity: f64,
    /// Ambient temperature per control step, degrees C. Consumers index it
    /// modulo its length, so a single entry means a constant ambient.
    pub ambient_temp_profile: Vec<f64>,
}

impl Default for ThermalZoneParams {
    fn default() -> Self {
        Self {
            thermal_resistance: 0.01,
            thermal_capacitance: 1.0e6,
            heater_capacity: 4000.0,
            ambient_temp_profile: vec![5.0],
        }
    }
}

impl ThermalZoneParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.thermal_resistance > 0.0) {
            return Err(ModelError::InvalidParameter(format!(
                "thermal resistance must be positive, got {}",
                self.thermal_resistance
            )));
        }
        if !(self.thermal_capacitance > 0.0) || !self.thermal_capacitance.is_finite() {
            return Err(ModelError::InvalidParameter(format!(
                "thermal capacitance must be positive and finite, got {}",
                self.thermal_capacitance
            )));
        }
        if !(self.heater_capacity > 0.0) || !self.heater_capacity.is_finite() {
            return Err(ModelError::InvalidParameter(format!(
                "heater capacity must be positive and finite, got {}",
                self.heater_capacity
            )));
        }
        if self.ambient_temp_profile.is_empty()
            || self.ambient_temp_profile.iter().any(|t| !t.is_finite())
        {
            return Err(ModelError::InvalidParameter(
                "ambient profile must be non-empty and finite".into(),
            ));
        }
        Ok(())
    }

    /// Ambient temperature at step `k` (profile repeats).
    pub fn ambient_at(&self, k: usize) -> f64 {
        self.ambient_temp_profile[k % self.ambient_temp_profile.len()]
    }

    pub fn ambient_mean(&self) -> f64 {
        self.ambient_temp_profile.iter().sum::<f64>() / self.ambient_temp_profile.len() as f64
    }
}

/// Zero-order-hold discretization of the RC zone. State is the room
/// temperature; inputs are `[heating power W, ambient temperature C]`;
/// output is the temperature (C = 1, D = 0).
pub fn build_thermal_model(params: &ThermalZoneParams, dt_s: f64) -> Result<LtiModel, ModelError> {
    params.validate()?;
    let rc = params.thermal_resistance * params.thermal_capacitance;
    // 1/(RC) underflows to 0 for an adiabatic (infinite-R) zone.
    let leak = if rc.is_finite() { 1.0 / rc } else { 0.0 };
    let a_c = DMatrix::from_element(1, 1, -leak);
    let b_c = DMatrix::from_row_slice(1, 2, &[1.0 / params.thermal_capacitance, leak]);
    let (a_d, b_d) = discretize_zoh(&a_c, &b_c, dt_s)?;
    LtiModel::new(
        a_d,
        b_d,
        DMatrix::from_element(1, 1, 1.0),
        DMatrix::zeros(1, 2),
        dt_s,
    )
}

/// Controller-side predictor with the ambient temperature promoted to a
/// constant-dynamics state, so an observer can track it from temperature
/// measurements alone. States `[T, T_amb]`, single heating-power input,
/// output `T`.
pub fn thermal_predictor_model(
    params: &ThermalZoneParams,
    dt_s: f64,
) -> Result<LtiModel, ModelError> {
    params.validate()?;
    let rc = params.thermal_resistance * params.thermal_capacitance;
    let leak = if rc.is_finite() { 1.0 / rc } else { 0.0 };
    let a_c = DMatrix::from_row_slice(2, 2, &[-leak, leak, 0.0, 0.0]);
    let b_c = DMatrix::from_row_slice(2, 1, &[1.0 / params.thermal_capacitance, 0.0]);
    let (a_d, b_d) = discretize_zoh(&a_c, &b_c, dt_s)?;
    LtiModel::new(
        a_d,
        b_d,
        DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
        DMatrix::zeros(1, 1),
        dt_s,
    )
}
