use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use smooth_ocp::cli::config::ScheduleLevel;
use smooth_ocp::cli::{run, RunConfig, RunError, RunOptions};

/// Caps the worker threads used for Jacobian columns.
const THREADS_ENV: &str = "SMOOTH_OCP_THREADS";

#[derive(Parser)]
#[command(
    name = "smooth-ocp",
    version,
    about = "Smoothed indirect shooting for state-constrained optimal control"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the configured problem over its sharpness schedule.
    Solve {
        /// JSON run configuration.
        config: PathBuf,
        /// Output directory, overriding `output.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated sharpness schedule, overriding `schedule`.
        #[arg(long, value_delimiter = ',')]
        rho: Option<Vec<f64>>,
        /// Suppress per-level progress.
        #[arg(long)]
        quiet: bool,
    },
}

fn main() -> ExitCode {
    let Command::Solve {
        config,
        out,
        rho,
        quiet,
    } = Cli::parse().command;
    let result = RunConfig::load(&config)
        .map_err(RunError::Config)
        .and_then(|mut cfg| {
            if let Some(dir) = out {
                cfg.output.dir = dir;
            }
            if let Some(rhos) = rho {
                cfg.schedule = rhos.into_iter().map(ScheduleLevel::Uniform).collect();
            }
            if let Ok(value) = std::env::var(THREADS_ENV) {
                let threads = value
                    .parse::<usize>()
                    .ok()
                    .filter(|&n| n > 0)
                    .ok_or_else(|| {
                        RunError::Config(
                            format!("{THREADS_ENV}: expected a positive integer, got {value:?}")
                                .into(),
                        )
                    })?;
                cfg.shooting.threads =
                    Some(cfg.shooting.threads.map_or(threads, |t| t.min(threads)));
            }
            run(&cfg, &RunOptions { quiet })
        });
    match result {
        Ok(report) => {
            if !quiet {
                eprintln!(
                    "solved {} levels in {:.2} s",
                    report.continuation.levels.len(),
                    report.wall_time
                );
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
