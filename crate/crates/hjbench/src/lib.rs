//! Benchmark driver for the fast marching solvers: configured runs, sweeps
//! over mesh steps and dimensions, and CSV or JSON reports of node counts,
//! timings and errors against the analytic optimum.

pub mod config;
pub mod report;
pub mod runner;

pub use config::{load_run, load_sweep, ConfigError, InvalidRun, Mode, Overrides, ProblemName, RunConfig, Sweep};
pub use report::{write_csv, LevelReport, RunReport, Status, Timing, Totals, CSV_HEADER};
pub use runner::{run, sweep};
