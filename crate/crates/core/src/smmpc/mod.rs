//! Data-driven predictive control from a partitioned signal matrix.
//!
//! Offline input/output trajectories are arranged into past/future Hankel
//! blocks ([`SignalMatrix`]); control picks the column combination that
//! maximizes the likelihood of the measured past outputs under an output-
//! noise model — a ridge-regularized quadratic fit — subject to hard
//! past-input matching and input bounds. No parametric model and no state
//! estimator are involved.

mod data;
mod signal;
mod step;

pub use data::{read_trajectory_csv, write_trajectory_csv};
pub use signal::{build_signal_matrix, SignalMatrix};
pub use step::{
    cross_validate, predict_outputs, CrossValidation, SmmpcConfig, SmmpcController, SmmpcStep,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SmmpcError {
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(
        "past-input equations inconsistent (residual {residual:.3e}); \
         input Hankel rank {input_rank} of {input_rows} rows"
    )]
    InconsistentPast {
        residual: f64,
        input_rank: usize,
        input_rows: usize,
    },
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(String),
}
