//! `pprs-bench`: run experiment grids, export pipeline schedules, and plot
//! result files.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pprs::experiment::{self, emit_plot, read_rows, ExperimentConfig, PlotAxis};
use pprs::Result;

#[derive(Parser)]
#[command(name = "pprs-bench", version, about = "Pipeline-parallel optimization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every grid point and seed of a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory, overriding `run.out`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated seeds, overriding `run.seeds`.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
    },
    /// Print the cell listing of a pipeline schedule as CSV.
    Schedule {
        /// bubbling, nse or gpipe
        #[arg(long)]
        mode: String,
        #[arg(long)]
        delta: usize,
        #[arg(long, default_value_t = 1)]
        k: usize,
        /// Number of samples (gpipe mode only).
        #[arg(long, default_value_t = 1)]
        m: usize,
        /// Inter-stage latency in slots (bubbling mode only).
        #[arg(long, default_value_t = 0)]
        tau: usize,
    },
    /// Plot a results CSV: one SVG per pipeline depth.
    Plot {
        #[arg(long = "in")]
        input: PathBuf,
        /// iterations or simulated_time
        #[arg(long, default_value = "simulated_time")]
        axis: String,
        /// Directory for the SVG files; defaults to the CSV's directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, out, seeds } => {
            let text = std::fs::read_to_string(&config)
                .map_err(|e| pprs::Error::ConfigParse(format!("{}: {e}", config.display())))?;
            let mut cfg = ExperimentConfig::parse(&text)?;
            if let Some(out) = out {
                cfg.out = out;
            }
            if let Some(seeds) = seeds {
                cfg.seeds = seeds;
                cfg.validate()?;
            }
            eprintln!("running {} runs into {}", cfg.run_count(), cfg.out.display());
            let result = experiment::run(&cfg)?;
            let plots = emit_plot(&result.rows, PlotAxis::SimulatedTime, &cfg.out)?;
            println!(
                "{:<6} {:>6} {:>5} {:>10} {:>10} {:>14} {:>14} {:>8}",
                "alg", "delta", "K", "lr", "gamma", "mean_best", "mean_final", "diverged"
            );
            for s in &result.summary {
                println!(
                    "{:<6} {:>6} {:>5} {:>10.1e} {:>10.1e} {:>14.6} {:>14.6} {:>5}/{}",
                    s.algorithm, s.delta, s.k, s.eta, s.gamma, s.mean_best_loss, s.mean_final_loss, s.diverged_runs, s.seeds
                );
            }
            for f in result.files.iter().chain(&plots) {
                eprintln!("wrote {}", f.display());
            }
        }
        Command::Schedule { mode, delta, k, m, tau } => {
            print!("{}", experiment::schedule_export(delta, k, &mode, m, tau)?);
        }
        Command::Plot { input, axis, out } => {
            let axis: PlotAxis = axis.parse()?;
            let rows = read_rows(&input)?;
            let dir = out.unwrap_or_else(|| {
                input
                    .parent()
                    .filter(|p| !p.as_os_str().is_empty())
                    .map(PathBuf::from)
                    .unwrap_or_else(|| PathBuf::from("."))
            });
            for f in emit_plot(&rows, axis, &dir)? {
                println!("{}", f.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
