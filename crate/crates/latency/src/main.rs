use std::path::PathBuf;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use loopbench_latency::{
    run_echo_server, run_prober, simulate_rtt, summarize, write_samples_csv, ChannelModel,
    ProbeConfig,
};

#[derive(Parser)]
#[command(name = "latency", about = "Round-trip delay measurement tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the echo server until interrupted.
    Serve {
        /// Address to bind, e.g. 0.0.0.0:7401.
        #[arg(long)]
        bind: String,
    },
    /// Probe a running echo server and record round-trip samples.
    Probe {
        /// Echo server address, e.g. 192.168.1.10:7401.
        #[arg(long)]
        target: String,
        #[arg(long, default_value_t = 1000)]
        count: usize,
        #[arg(long = "interval-ms", default_value_t = 250)]
        interval_ms: u64,
        #[arg(long = "timeout-ms", default_value_t = 1000)]
        timeout_ms: u64,
        #[arg(long = "payload-bytes", default_value_t = 64)]
        payload_bytes: usize,
        /// Output CSV (seq,rtt_ns,lost).
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw round-trip samples from a seeded channel model.
    Simulate {
        /// Built-in profile (ethernet, lan, wifi) or a JSON model file.
        #[arg(long)]
        profile: String,
        #[arg(long, default_value_t = 1000)]
        count: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Output CSV (seq,rtt_ns,lost).
        #[arg(long)]
        out: PathBuf,
    },
}

fn print_stats(samples: &[loopbench_latency::RttSample]) {
    match summarize(samples) {
        Ok(stats) => {
            let ms = |v: f64| v / 1e6;
            println!(
                "{} samples ({} lost): min {:.3} ms, q1 {:.3} ms, median {:.3} ms, q3 {:.3} ms, max {:.3} ms, mean {:.3} ms",
                stats.n,
                stats.n_lost,
                ms(stats.min),
                ms(stats.q1),
                ms(stats.median),
                ms(stats.q3),
                ms(stats.max),
                ms(stats.mean)
            );
        }
        Err(_) => println!("{} samples, all lost", samples.len()),
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Serve { bind } => {
            let server = run_echo_server(bind.as_str())
                .with_context(|| format!("binding echo server on {bind}"))?;
            println!("echo server listening on {}", server.local_addr());
            loop {
                std::thread::sleep(Duration::from_secs(3600));
            }
        }
        Command::Probe {
            target,
            count,
            interval_ms,
            timeout_ms,
            payload_bytes,
            out,
        } => {
            let cfg = ProbeConfig {
                count,
                interval: Duration::from_millis(interval_ms),
                timeout: Duration::from_millis(timeout_ms),
                payload_len: payload_bytes,
            };
            let run = run_prober(target.as_str(), &cfg);
            write_samples_csv(&out, &run.samples)
                .with_context(|| format!("writing {}", out.display()))?;
            if let Some(err) = run.connect_error {
                bail!("target unreachable: {err}");
            }
            print_stats(&run.samples);
            Ok(())
        }
        Command::Simulate {
            profile,
            count,
            seed,
            out,
        } => {
            let model = match ChannelModel::profile(&profile, seed) {
                Some(m) => m,
                None => {
                    let text = std::fs::read_to_string(&profile).with_context(|| {
                        format!("'{profile}' is not a built-in profile or a readable file")
                    })?;
                    let mut model: ChannelModel =
                        serde_json::from_str(&text).context("parsing channel model JSON")?;
                    model.seed = seed;
                    model
                }
            };
            let samples = simulate_rtt(&model, count)?;
            write_samples_csv(&out, &samples)
                .with_context(|| format!("writing {}", out.display()))?;
            print_stats(&samples);
            Ok(())
        }
    }
}
