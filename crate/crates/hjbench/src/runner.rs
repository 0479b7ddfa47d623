//! Executes configured runs and assembles their reports.

use std::time::{Duration, Instant};

use mlfmm::{run_multilevel_recording, Error, MlfmResult, RunOptions};
use rayon::prelude::*;

use crate::config::{InvalidRun, ProblemName, RunConfig};
use crate::report::{median, LevelReport, RunReport, Status, Timing, Totals};

fn totals(levels: &[LevelReport]) -> Totals {
    Totals { visited_nodes: levels.iter().map(|l| l.visited).sum(), wall_ms: levels.iter().map(|l| l.wall_ms).sum() }
}

/// Runs `config.repetitions` times and reports the repetition with the
/// (lower) median wall time. The time budget covers all repetitions together.
pub fn run(config: &RunConfig) -> RunReport {
    let started = Instant::now();
    let deadline = config.budget_secs.map(|b| started + Duration::from_secs_f64(b));
    let prepared = config.problem_spec().and_then(|p| config.schedule(&p).map(|s| (p, s)));
    let (problem, schedule) = match prepared {
        Ok(x) => x,
        Err(e) => return RunReport::failed(Some(config.clone()), e.to_string()),
    };
    let oracle = match config.problem {
        ProblemName::Paper => mlfmm::paper_oracle(config.dim).ok().map(|o| o.tau_star),
        _ => None,
    };
    let options = RunOptions { deadline, ..RunOptions::default() };

    let mut outcomes: Vec<(f64, MlfmResult)> = Vec::with_capacity(config.repetitions);
    for _ in 0..config.repetitions {
        let mut records = Vec::new();
        let t = Instant::now();
        match run_multilevel_recording(&problem, &schedule, options, &mut records) {
            Ok(result) => outcomes.push((t.elapsed().as_secs_f64() * 1e3, result)),
            Err(e) => {
                let status = if e == Error::BudgetExceeded { Status::BudgetExceeded } else { Status::Error };
                let levels: Vec<LevelReport> = records.iter().map(LevelReport::from).collect();
                let samples: Vec<f64> = outcomes.iter().map(|o| o.0).collect();
                return RunReport {
                    config: Some(config.clone()),
                    status,
                    message: Some(e.to_string()),
                    h: Some(schedule.finest_h),
                    totals: totals(&levels),
                    levels,
                    v_star: None,
                    tau_star: None,
                    oracle_tau_star: oracle,
                    error_vs_oracle: None,
                    timing: Timing {
                        median_ms: if samples.is_empty() { 0.0 } else { median(&samples) },
                        samples_ms: samples,
                    },
                    warnings: Vec::new(),
                };
            }
        }
    }

    let samples: Vec<f64> = outcomes.iter().map(|o| o.0).collect();
    let mut order: Vec<usize> = (0..outcomes.len()).collect();
    order.sort_by(|&a, &b| samples[a].total_cmp(&samples[b]));
    let (_, chosen) = &outcomes[order[(order.len() - 1) / 2]];
    let levels: Vec<LevelReport> = chosen.per_level.iter().map(LevelReport::from).collect();
    RunReport {
        config: Some(config.clone()),
        status: Status::Ok,
        message: None,
        h: Some(schedule.finest_h),
        totals: totals(&levels),
        levels,
        v_star: Some(chosen.v_star),
        tau_star: Some(chosen.tau_star),
        oracle_tau_star: oracle,
        error_vs_oracle: oracle.map(|o| (chosen.tau_star - o).abs()),
        timing: Timing { median_ms: median(&samples), samples_ms: samples },
        warnings: chosen.warnings.clone(),
    }
}

/// Runs every entry on at most `jobs` worker threads, keeping input order.
/// Entries that failed to load become error reports.
pub fn sweep(entries: Vec<Result<RunConfig, InvalidRun>>, jobs: usize) -> Vec<RunReport> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build().expect("thread pool");
    pool.install(|| {
        entries
            .into_par_iter()
            .map(|entry| match entry {
                Ok(config) => run(&config),
                Err(InvalidRun { echo, error }) => RunReport::failed(echo.map(|c| *c), error.to_string()),
            })
            .collect()
    })
}
