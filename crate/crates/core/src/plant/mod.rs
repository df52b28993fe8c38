//! Discrete-time plants for the two case studies.
//!
//! Everything here is immutable after construction; stepping a plant is a
//! pure function of its arguments.

mod battery;
mod lti;
mod pwm;
mod thermal;

pub use battery::{battery_step, build_battery_model, BatteryParams};
pub use lti::{discretize_zoh, LtiModel, Trajectory};
pub use pwm::{pwm_encode, pwm_realized_power, PwmSchedule};
pub use thermal::{build_thermal_model, thermal_predictor_model, ThermalZoneParams};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}
