use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use hjbench::{load_run, load_sweep, write_csv, Mode, Overrides, ProblemName, RunReport, Status};

/// Benchmarks classical and multi-level fast marching on minimum-time problems
#[derive(Parser, Debug)]
#[command(name = "hjbench", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one configuration and write its JSON report
    Run {
        /// TOML run configuration
        config: PathBuf,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Run every configuration of a sweep file and write one CSV row per run
    Sweep {
        /// TOML sweep configuration
        config: PathBuf,
        #[command(flatten)]
        overrides: OverrideArgs,
        /// Number of runs executed concurrently
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Also write every run's JSON report, as an array, to this file
        #[arg(long)]
        reports: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct OverrideArgs {
    /// Space dimension
    #[arg(long)]
    dim: Option<usize>,
    /// classic, two_level or multi_level
    #[arg(long)]
    mode: Option<Mode>,
    /// Finest mesh step (replaces epsilon)
    #[arg(long)]
    h: Option<f64>,
    /// Target accuracy (replaces the finest mesh step)
    #[arg(long)]
    epsilon: Option<f64>,
    /// Fixed number of levels for multi_level
    #[arg(long)]
    levels: Option<usize>,
    /// Threshold constant C in eta = C H^gamma
    #[arg(long)]
    eta_const: Option<f64>,
    /// Assumed convergence rate of the scheme
    #[arg(long)]
    gamma: Option<f64>,
    /// Growth exponent of the near-optimal sets
    #[arg(long)]
    beta: Option<f64>,
    /// paper, bump or two_channel
    #[arg(long)]
    problem: Option<ProblemName>,
    /// Output file; standard output when absent
    #[arg(long)]
    out: Option<PathBuf>,
    /// Wall-clock budget in seconds for each run
    #[arg(long)]
    budget_secs: Option<f64>,
}

impl From<OverrideArgs> for Overrides {
    fn from(a: OverrideArgs) -> Self {
        Overrides {
            dim: a.dim,
            mode: a.mode,
            h: a.h,
            epsilon: a.epsilon,
            levels: a.levels,
            eta_const: a.eta_const,
            gamma: a.gamma,
            beta: a.beta,
            problem: a.problem,
            out: a.out,
            budget_secs: a.budget_secs,
        }
    }
}

const EXIT_USAGE: u8 = 1;
const EXIT_ALL_FAILED: u8 = 2;

fn writer(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn summarize(report: &RunReport) {
    let name = report.config.as_ref().map(|c| format!("{} d={} {}", c.problem.as_str(), c.dim, c.mode.as_str()));
    let name = name.unwrap_or_else(|| "unreadable run".into());
    match (&report.status, &report.message) {
        (Status::Ok, _) => eprintln!(
            "{name}: tau* = {:.6}, visited = {}, {:.1} ms",
            report.tau_star.unwrap_or(f64::NAN),
            report.totals.visited_nodes,
            report.timing.median_ms
        ),
        (status, message) => eprintln!("{name}: {} ({})", status.as_str(), message.as_deref().unwrap_or("")),
    }
    for w in &report.warnings {
        eprintln!("  warning: {w}");
    }
}

fn execute(command: Command) -> anyhow::Result<ExitCode> {
    match command {
        Command::Run { config, overrides } => {
            let config = match load_run(&config, &overrides.into()) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("hjbench: {e}");
                    return Ok(ExitCode::from(EXIT_USAGE));
                }
            };
            let report = hjbench::run(&config);
            summarize(&report);
            let mut out = writer(config.out.as_deref())?;
            writeln!(out, "{}", report.to_json())?;
            out.flush()?;
            Ok(if report.status == Status::Ok { ExitCode::SUCCESS } else { ExitCode::from(EXIT_ALL_FAILED) })
        }
        Command::Sweep { config, overrides, jobs, reports } => {
            let sweep = match load_sweep(&config, &overrides.into()) {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("hjbench: {e}");
                    return Ok(ExitCode::from(EXIT_USAGE));
                }
            };
            let results = hjbench::sweep(sweep.entries, jobs);
            results.iter().for_each(summarize);
            write_csv(writer(sweep.out.as_deref())?, &results)?;
            if let Some(path) = reports {
                let mut w = writer(Some(&path))?;
                serde_json::to_writer_pretty(&mut w, &results)?;
                writeln!(w)?;
                w.flush()?;
            }
            let all_failed = results.iter().all(|r| r.status != Status::Ok);
            Ok(if all_failed { ExitCode::from(EXIT_ALL_FAILED) } else { ExitCode::SUCCESS })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("hjbench: {e:#}");
            ExitCode::from(EXIT_ALL_FAILED)
        }
    }
}
