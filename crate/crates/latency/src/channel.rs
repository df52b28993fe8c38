use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::samples::RttSample;
use crate::LatencyError;

/// One-way delay distribution, nanoseconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DelayModel {
    Fixed { one_way_ns: u64 },
    Uniform { lo_ns: u64, hi_ns: u64 },
    /// Log-normal over nanoseconds: `mu_ln_ns` is the natural log of the
    /// median one-way delay.
    Lognormal { mu_ln_ns: f64, sigma: f64 },
}

/// Seeded two-way channel: each probe draws an outbound and a return
/// delay plus independent per-direction drops. The same seed always
/// produces the same samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    pub delay: DelayModel,
    /// Per-direction drop probability in [0, 1].
    pub drop_prob: f64,
    pub seed: u64,
}

impl ChannelModel {
    pub fn validate(&self) -> Result<(), LatencyError> {
        if !(0.0..=1.0).contains(&self.drop_prob) {
            return Err(LatencyError::InvalidChannel(format!(
                "drop probability {} outside [0, 1]",
                self.drop_prob
            )));
        }
        match &self.delay {
            DelayModel::Fixed { one_way_ns } => {
                if *one_way_ns == 0 {
                    return Err(LatencyError::InvalidChannel(
                        "fixed delay must be positive".into(),
                    ));
                }
            }
            DelayModel::Uniform { lo_ns, hi_ns } => {
                if *lo_ns == 0 || lo_ns > hi_ns {
                    return Err(LatencyError::InvalidChannel(format!(
                        "uniform delay bounds [{lo_ns}, {hi_ns}] invalid"
                    )));
                }
            }
            DelayModel::Lognormal { mu_ln_ns, sigma } => {
                if !mu_ln_ns.is_finite() || !(*sigma > 0.0) || !sigma.is_finite() {
                    return Err(LatencyError::InvalidChannel(format!(
                        "lognormal parameters (mu {mu_ln_ns}, sigma {sigma}) invalid"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Built-in stand-ins for the measured paths: `ethernet` (fixed
    /// 0.5 ms one-way), `lan` (uniform 0.5-2 ms), `wifi` (log-normal,
    /// median 120 ms one-way, sigma 0.6, 0.5% drops).
    pub fn profile(name: &str, seed: u64) -> Option<ChannelModel> {
        let model = match name {
            "ethernet" => ChannelModel {
                delay: DelayModel::Fixed {
                    one_way_ns: 500_000,
                },
                drop_prob: 0.0,
                seed,
            },
            "lan" => ChannelModel {
                delay: DelayModel::Uniform {
                    lo_ns: 500_000,
                    hi_ns: 2_000_000,
                },
                drop_prob: 0.0,
                seed,
            },
            "wifi" => ChannelModel {
                delay: DelayModel::Lognormal {
                    mu_ln_ns: (120.0e6_f64).ln(),
                    sigma: 0.6,
                },
                drop_prob: 0.005,
                seed,
            },
            _ => return None,
        };
        Some(model)
    }
}

fn draw_one_way(delay: &DelayModel, rng: &mut ChaCha8Rng) -> u64 {
    match delay {
        DelayModel::Fixed { one_way_ns } => *one_way_ns,
        DelayModel::Uniform { lo_ns, hi_ns } => rng.random_range(*lo_ns..=*hi_ns),
        DelayModel::Lognormal { mu_ln_ns, sigma } => {
            let dist = LogNormal::new(*mu_ln_ns, *sigma).expect("validated");
            dist.sample(rng).round().max(1.0) as u64
        }
    }
}

/// Simulates `n_probes` round trips. Per probe the draw order is fixed:
/// outbound delay, outbound drop, return delay, return drop; a probe is
/// lost when either direction drops. Bit-reproducible for a given seed.
pub fn simulate_rtt(channel: &ChannelModel, n_probes: usize) -> Result<Vec<RttSample>, LatencyError> {
    channel.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(channel.seed);
    let mut samples = Vec::with_capacity(n_probes);
    for seq in 0..n_probes {
        let out = draw_one_way(&channel.delay, &mut rng);
        let drop_out = rng.random::<f64>() < channel.drop_prob;
        let back = draw_one_way(&channel.delay, &mut rng);
        let drop_back = rng.random::<f64>() < channel.drop_prob;
        let lost = drop_out || drop_back;
        samples.push(RttSample {
            seq: seq as u32,
            rtt_ns: if lost { 0 } else { out + back },
            lost,
        });
    }
    Ok(samples)
}
