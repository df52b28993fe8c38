use nalgebra::DMatrix;

use super::lti::LtiModel;
use super::ModelError;

/// Stationary battery tracked by its state of charge in percent.
#[derive(Debug, Clone, PartialEq)]
pub struct BatteryParams {
    /// Usable capacity, Wh.
    pub energy_capacity_wh: f64,
    /// Fraction of charging power stored, in (0, 1].
    pub charge_efficiency: f64,
    /// Fraction of stored energy delivered when discharging, in (0, 1].
    pub discharge_efficiency: f64,
    /// Most negative allowed power (discharge), W.
    pub power_min_w: f64,
    /// Most positive allowed power (charge), W.
    pub power_max_w: f64,
}

impl Default for BatteryParams {
    fn default() -> Self {
        Self {
            energy_capacity_wh: 96_000.0,
            charge_efficiency: 0.95,
            discharge_efficiency: 0.95,
            power_min_w: -20_000.0,
            power_max_w: 20_000.0,
        }
    }
}

impl BatteryParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.energy_capacity_wh > 0.0) || !self.energy_capacity_wh.is_finite() {
            return Err(ModelError::InvalidParameter(format!(
                "energy capacity must be positive and finite, got {}",
                self.energy_capacity_wh
            )));
        }
        for (name, eta) in [
            ("charge efficiency", self.charge_efficiency),
            ("discharge efficiency", self.discharge_efficiency),
        ] {
            if !(eta > 0.0 && eta <= 1.0) {
                return Err(ModelError::InvalidParameter(format!(
                    "{name} must be in (0, 1], got {eta}"
                )));
            }
        }
        if !(self.power_min_w < 0.0 && self.power_max_w > 0.0)
            || !self.power_min_w.is_finite()
            || !self.power_max_w.is_finite()
        {
            return Err(ModelError::InvalidParameter(format!(
                "power limits must satisfy min < 0 < max, got [{}, {}]",
                self.power_min_w, self.power_max_w
            )));
        }
        Ok(())
    }

    /// Percentage points of SOC added per watt of charging power over one
    /// step of `dt_s` seconds, at unit efficiency.
    pub fn soc_gain_per_w(&self, dt_s: f64) -> f64 {
        100.0 * dt_s / (3600.0 * self.energy_capacity_wh)
    }
}

/// SOC integrator `SOC_{k+1} = SOC_k + 100 eta u dt / (3600 E)`, exported
/// with `eta` fixed to the charge efficiency. The sign-dependent efficiency
/// lives in [`battery_step`]; controllers typically predict with a unit-
/// efficiency copy of the parameters.
pub fn build_battery_model(params: &BatteryParams, dt_s: f64) -> Result<LtiModel, ModelError> {
    params.validate()?;
    if !(dt_s > 0.0) || !dt_s.is_finite() {
        return Err(ModelError::InvalidParameter(format!(
            "sampling period must be positive and finite, got {dt_s}"
        )));
    }
    let gain = params.charge_efficiency * params.soc_gain_per_w(dt_s);
    LtiModel::new(
        DMatrix::from_element(1, 1, 1.0),
        DMatrix::from_element(1, 1, gain),
        DMatrix::from_element(1, 1, 1.0),
        DMatrix::zeros(1, 1),
        dt_s,
    )
}

/// Exact nonlinear SOC step: charging multiplies by the charge efficiency,
/// discharging divides by the discharge efficiency.
pub fn battery_step(params: &BatteryParams, soc_percent: f64, power_w: f64, dt_s: f64) -> f64 {
    let eta = if power_w >= 0.0 {
        params.charge_efficiency
    } else {
        1.0 / params.discharge_efficiency
    };
    soc_percent + eta * power_w * params.soc_gain_per_w(dt_s)
}
