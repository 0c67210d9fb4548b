use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use swarm_cleanup::engine::SimConfig;
use swarm_cleanup::harness;
use swarm_cleanup::Error;

#[derive(Parser)]
#[command(name = "swarm-cleanup", version, about = "Swarm contamination cleanup simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write its metrics and snapshots.
    Run {
        /// TOML config; omitted keys take their defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated whole seconds, e.g. `0,1000,4000`.
        #[arg(long, value_delimiter = ',')]
        snapshot_times: Option<Vec<u32>>,
    },
    /// Run every (population, beta, repetition) of a plan.
    Sweep {
        #[arg(long)]
        plan: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = default_jobs())]
        jobs: usize,
    },
    /// Median series and ANOVA tables for a finished sweep.
    Analyze {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long)]
        allow_partial: bool,
        #[arg(long, default_value_t = 8)]
        time_bins: usize,
    },
    /// Convert a `final_field.csv` grid into a PGM image.
    Render {
        #[arg(long)]
        field: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn execute(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Run { config, seed, out, snapshot_times } => {
            let cfg = match config {
                Some(path) => harness::load_sim_config(&path)?,
                None => SimConfig::default(),
            };
            let art = harness::cmd_run(cfg, seed, &out, snapshot_times)?;
            println!("wrote {}", art.metrics.display());
            for s in &art.snapshots {
                println!("wrote {}", s.display());
            }
            Ok(0)
        }
        Command::Sweep { plan, out, jobs } => {
            let plan = match plan {
                Some(path) => harness::load_plan(&path)?,
                None => harness::ExperimentPlan::default(),
            };
            let summary = harness::cmd_sweep(&plan, &out, jobs)?;
            let failed = summary.failures();
            println!("{} runs, {} failed", summary.entries.len(), failed);
            Ok(if failed > 0 { 3 } else { 0 })
        }
        Command::Analyze { dir, allow_partial, time_bins } => {
            let analysis = harness::cmd_analyze(&dir, allow_partial, time_bins)?;
            for (label, result) in [("cue", &analysis.anova_cue), ("coherency", &analysis.anova_coherency)] {
                let Some(r) = result else {
                    eprintln!("anova {label}: skipped, no factor has two levels");
                    continue;
                };
                if r.degenerate_variance {
                    eprintln!("anova {label}: residual variance is zero, F and p are degenerate");
                }
                for e in &r.effects {
                    println!("{label:>9} {:<10} F={:<10.4} p={:.3e}", e.name, e.f, e.p);
                }
            }
            Ok(0)
        }
        Command::Render { field, out } => {
            harness::cmd_render(&field, &out)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
