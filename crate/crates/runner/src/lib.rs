//! Closed-loop experiment runner for the two built-in case studies.
//!
//! A [`Scenario`](scenario::Scenario) describes one experiment: a plant
//! (thermal zone or battery), a controller (model-based MPC or data-driven
//! SMM-PC), a reference, disturbance windows and noise. [`run_scenario`]
//! executes the loop deterministically for a fixed seed;
//! [`report::emit_report`] writes byte-stable CSV/JSON artifacts.

pub mod controller;
pub mod metrics;
pub mod report;
pub mod scenario;
pub mod sim;

pub use metrics::{compute_metrics, Metrics};
pub use report::emit_report;
pub use scenario::{case1_heating, case2_battery, Scenario};
pub use sim::{run_scenario, RunReport, StepRecord};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error("plant error: {0}")]
    Plant(#[from] loopbench_core::plant::ModelError),
    #[error("estimation error: {0}")]
    Estimation(#[from] loopbench_core::estimation::EstimationError),
    #[error("controller error: {0}")]
    Mpc(#[from] loopbench_core::mpc::MpcError),
    #[error("controller error: {0}")]
    Smmpc(#[from] loopbench_core::smmpc::SmmpcError),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
}

impl RunnerError {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
