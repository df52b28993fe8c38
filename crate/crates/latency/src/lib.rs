//! Round-trip delay measurement over a framed stream protocol, plus a
//! seeded channel simulator for reproducible delay profiles.
//!
//! A prober sends timestamped probe frames to an echo server and measures
//! the time until each acknowledgement on a monotonic clock. The simulator
//! produces the same sample format from parametric delay models so the
//! statistics pipeline can be exercised deterministically.

mod channel;
mod prober;
mod samples;
mod server;
mod stats;
mod wire;

pub use channel::{simulate_rtt, ChannelModel, DelayModel};
pub use prober::{run_prober, ProbeConfig, ProbeRun};
pub use samples::{read_samples_csv, write_samples_csv, RttSample};
pub use server::{run_echo_server, EchoServerHandle};
pub use stats::{summarize, LatencyStats};
pub use wire::{read_frame, ProbeMessage, FRAME_HEADER_LEN, MAGIC};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LatencyError {
    #[error("malformed frame: {0}")]
    Wire(String),
    #[error("no successful samples to summarize")]
    NoSamples,
    #[error("invalid channel model: {0}")]
    InvalidChannel(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(String),
}
