use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use loopbench_runner::report::{read_trajectory, recompute_metrics};
use loopbench_runner::scenario::Scenario;
use loopbench_runner::{case1_heating, case2_battery, emit_report, run_scenario};

#[derive(Parser)]
#[command(name = "runner", about = "Closed-loop control experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write its report.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a built-in preset (case1 = heating, case2 = battery).
    Demo {
        /// case1 or case2.
        case: String,
        #[arg(long, default_value = "mpc")]
        controller: String,
        #[arg(long, default_value = "runs")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Recompute metrics from a trajectory.csv.
    Metrics {
        #[arg(long)]
        traj: PathBuf,
        /// Comfort band as `lo,hi` for violation counting.
        #[arg(long)]
        band: Option<String>,
    },
}

fn execute(scenario: Scenario, out: PathBuf) -> Result<()> {
    let report = run_scenario(&scenario).context("running scenario")?;
    let written = emit_report(&report, &out).context("writing report")?;
    if let Some(step) = report.failed_at {
        eprintln!("controller failed at step {step}; partial trajectory written");
    }
    println!(
        "{}: {} steps, mean error {:.6}, rmse {:.6}, violations {} ({} during disturbances), energy {:.3} Wh",
        scenario.name,
        report.steps.len(),
        report.metrics.mean_error,
        report.metrics.rmse,
        report.metrics.comfort_violation_steps,
        report.metrics.violation_steps_during_disturbance,
        report.metrics.energy_used_wh
    );
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            scenario,
            out,
            seed,
        } => {
            let mut scenario = Scenario::load(&scenario)?;
            if let Some(seed) = seed {
                scenario.seed = seed;
            }
            execute(scenario, out)
        }
        Command::Demo {
            case,
            controller,
            out,
            seed,
        } => {
            let mut scenario = match case.as_str() {
                "case1" => case1_heating(),
                "case2" => case2_battery(),
                other => bail!("unknown case '{other}' (expected case1 or case2)"),
            };
            scenario = scenario.with_controller_kind(&controller)?;
            if let Some(seed) = seed {
                scenario.seed = seed;
            }
            let out = out.join(format!("{}_{}", scenario.name, controller));
            execute(scenario, out)
        }
        Command::Metrics { traj, band } => {
            let columns = read_trajectory(&traj)?;
            let band = match band {
                Some(text) => {
                    let parts: Vec<&str> = text.split(',').collect();
                    if parts.len() != 2 {
                        bail!("--band expects 'lo,hi'");
                    }
                    Some((
                        parts[0].trim().parse::<f64>().context("band lo")?,
                        parts[1].trim().parse::<f64>().context("band hi")?,
                    ))
                }
                None => None,
            };
            let metrics = recompute_metrics(&columns, band)?;
            println!("{}", serde_json::to_string_pretty(&metrics)?);
            Ok(())
        }
    }
}
