use std::fs;
use std::path::Path;

use crate::LatencyError;

/// One round-trip measurement. `rtt_ns` is zero for lost probes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RttSample {
    pub seq: u32,
    pub rtt_ns: u64,
    pub lost: bool,
}

/// Writes samples as `seq,rtt_ns,lost` CSV.
pub fn write_samples_csv(path: &Path, samples: &[RttSample]) -> Result<(), LatencyError> {
    let mut out = String::from("seq,rtt_ns,lost\n");
    for s in samples {
        out.push_str(&format!("{},{},{}\n", s.seq, s.rtt_ns, s.lost));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_samples_csv(path: &Path) -> Result<Vec<RttSample>, LatencyError> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some("seq,rtt_ns,lost") => {}
        other => {
            return Err(LatencyError::Parse(format!(
                "expected header 'seq,rtt_ns,lost', got {other:?}"
            )))
        }
    }
    let mut samples = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(LatencyError::Parse(format!(
                "row {idx}: expected 3 fields, got {}",
                fields.len()
            )));
        }
        samples.push(RttSample {
            seq: fields[0]
                .parse()
                .map_err(|_| LatencyError::Parse(format!("row {idx}: bad seq")))?,
            rtt_ns: fields[1]
                .parse()
                .map_err(|_| LatencyError::Parse(format!("row {idx}: bad rtt_ns")))?,
            lost: fields[2]
                .parse()
                .map_err(|_| LatencyError::Parse(format!("row {idx}: bad lost flag")))?,
        });
    }
    Ok(samples)
}
