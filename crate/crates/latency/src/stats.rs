use crate::samples::RttSample;
use crate::LatencyError;

/// Quartile summary over the non-lost samples, nanoseconds. Quartiles use
/// inclusive linear interpolation between order statistics, so results are
/// identical across implementations.
#[derive(Debug, Clone, PartialEq)]
pub struct LatencyStats {
    pub n: usize,
    pub n_lost: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
}

/// Quantile at fraction `q` of an ascending slice, inclusive method:
/// position `q (n-1)` with linear interpolation.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

pub fn summarize(samples: &[RttSample]) -> Result<LatencyStats, LatencyError> {
    let mut rtts: Vec<f64> = samples
        .iter()
        .filter(|s| !s.lost)
        .map(|s| s.rtt_ns as f64)
        .collect();
    if rtts.is_empty() {
        return Err(LatencyError::NoSamples);
    }
    rtts.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let n = rtts.len();
    let n_lost = samples.len() - n;
    Ok(LatencyStats {
        n,
        n_lost,
        min: rtts[0],
        q1: quantile(&rtts, 0.25),
        median: quantile(&rtts, 0.5),
        q3: quantile(&rtts, 0.75),
        max: rtts[n - 1],
        mean: rtts.iter().sum::<f64>() / n as f64,
    })
}
