//! Control core for desk-scale closed-loop experiments.
//!
//! The crate provides the pieces needed to run receding-horizon control
//! loops against small simulated plants:
//!
//! * [`plant`] — discrete-time LTI models, the thermal-zone and battery
//!   case-study plants, and PWM actuation.
//! * [`estimation`] — a Kalman filter with the Joseph-form covariance
//!   update.
//! * [`mpc`] — horizon-N optimal control problems condensed to dense
//!   box-constrained QPs and an embedded ADMM solver.
//! * [`smmpc`] — data-driven predictive control from a partitioned
//!   signal (Hankel) matrix, reusing the same QP solver.

pub mod estimation;
pub mod mpc;
pub mod plant;
pub mod smmpc;
