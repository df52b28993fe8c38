//! Receding-horizon control via a condensed quadratic program.
//!
//! [`OcpSpec`] describes one horizon-N optimal control problem; [`condense`]
//! eliminates the states through the prediction matrices and produces a
//! dense box/affine-constrained QP; [`solve_qp`] is an embedded ADMM
//! (operator-splitting) solver with equilibration and solution polishing;
//! [`MpcController`] ties the pieces into one receding-horizon step with
//! the expensive matrices built once and reused.

mod controller;
mod ocp;
mod solver;

pub use controller::{MpcController, MpcStep};
pub use ocp::{build_ocp, condense, OcpSpec};
pub use solver::{solve_qp, AdmmSettings, AdmmWorkspace, QpProblem, QpSolution, QpStatus};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MpcError {
    #[error("invalid problem: {0}")]
    InvalidSpec(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}
