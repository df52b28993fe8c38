use std::io::Write;
use std::net::{SocketAddr, TcpStream, ToSocketAddrs};
use std::sync::OnceLock;
use std::thread;
use std::time::{Duration, Instant};

use crate::samples::RttSample;
use crate::wire::{read_frame, ProbeMessage};
use crate::LatencyError;

/// Nanoseconds on the process-wide monotonic clock. Wall-clock
/// adjustments cannot affect it.
pub(crate) fn monotonic_ns() -> u64 {
    static ORIGIN: OnceLock<Instant> = OnceLock::new();
    let origin = ORIGIN.get_or_init(Instant::now);
    origin.elapsed().as_nanos() as u64
}

/// Round trip from matching send/receive timestamps; clamps instead of
/// going negative if the timestamps are inconsistent.
pub(crate) fn rtt_from(send_ns: u64, recv_ns: u64) -> u64 {
    recv_ns.saturating_sub(send_ns)
}

#[derive(Debug, Clone)]
pub struct ProbeConfig {
    pub count: usize,
    pub interval: Duration,
    pub timeout: Duration,
    pub payload_len: usize,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            count: 1000,
            interval: Duration::from_millis(250),
            timeout: Duration::from_millis(1000),
            payload_len: 64,
        }
    }
}

/// Outcome of a probing run. When the target was unreachable every sample
/// is marked lost and `connect_error` carries the reason.
#[derive(Debug, Clone)]
pub struct ProbeRun {
    pub samples: Vec<RttSample>,
    pub connect_error: Option<String>,
}

fn all_lost(count: usize) -> Vec<RttSample> {
    (0..count)
        .map(|seq| RttSample {
            seq: seq as u32,
            rtt_ns: 0,
            lost: true,
        })
        .collect()
}

/// Sends `count` probes over one stream connection and measures each
/// acknowledgement on the monotonic clock. Late acknowledgements for
/// already-expired probes are discarded by sequence number.
pub fn run_prober(target: impl ToSocketAddrs, cfg: &ProbeConfig) -> ProbeRun {
    let addr: Option<SocketAddr> = target.to_socket_addrs().ok().and_then(|mut a| a.next());
    let Some(addr) = addr else {
        return ProbeRun {
            samples: all_lost(cfg.count),
            connect_error: Some("target address did not resolve".into()),
        };
    };
    let mut stream = match TcpStream::connect_timeout(&addr, Duration::from_secs(5)) {
        Ok(s) => s,
        Err(e) => {
            return ProbeRun {
                samples: all_lost(cfg.count),
                connect_error: Some(format!("connect to {addr} failed: {e}")),
            }
        }
    };
    let _ = stream.set_nodelay(true);

    let mut samples = Vec::with_capacity(cfg.count);
    for seq in 0..cfg.count as u32 {
        let msg = ProbeMessage {
            seq,
            t_send_ns: monotonic_ns(),
            payload: vec![0u8; cfg.payload_len],
        };
        let encoded = match msg.encode() {
            Ok(e) => e,
            Err(_) => {
                samples.push(RttSample {
                    seq,
                    rtt_ns: 0,
                    lost: true,
                });
                continue;
            }
        };
        if stream.write_all(&encoded).is_err() {
            samples.push(RttSample {
                seq,
                rtt_ns: 0,
                lost: true,
            });
            continue;
        }
        let deadline_ns = msg.t_send_ns + cfg.timeout.as_nanos() as u64;
        let mut result = RttSample {
            seq,
            rtt_ns: 0,
            lost: true,
        };
        // A zero timeout means "count it lost without waiting".
        while !cfg.timeout.is_zero() {
            let now = monotonic_ns();
            if now >= deadline_ns {
                break;
            }
            let remaining = Duration::from_nanos(deadline_ns - now);
            if stream.set_read_timeout(Some(remaining)).is_err() {
                break;
            }
            match read_frame(&mut stream) {
                Ok(ack) if ack.seq == seq => {
                    result = RttSample {
                        seq,
                        rtt_ns: rtt_from(ack.t_send_ns, monotonic_ns()),
                        lost: false,
                    };
                    break;
                }
                // Stale ack from an earlier timed-out probe.
                Ok(_) => continue,
                Err(LatencyError::Io(_)) => break,
                Err(_) => continue,
            }
        }
        samples.push(result);
        if !cfg.interval.is_zero() && (seq as usize) < cfg.count - 1 {
            thread::sleep(cfg.interval);
        }
    }
    ProbeRun {
        samples,
        connect_error: None,
    }
}
