//! Minimum-time (eikonal) solvers on regular grids: classical and partial
//! fast marching, plus two-level and multi-level fast marching that refine
//! only around the optimal trajectories.

pub mod eikonal;
pub mod error;
pub mod grid;
pub mod mlfm;
pub mod problems;

pub use eikonal::{
    inverse_kruzkov, kruzkov, local_update, partial_fast_march, partial_fast_march_with, upwind_root, FrontSets,
    MarchOptions, NodeState, SpeedField, ValueField,
};
pub use error::{Direction, Error, Result};
pub use grid::{euclid, linf, AxisNeighbors, BoxDomain, GridSpec, Region, RestrictedGrid};
pub use mlfm::{
    bidirectional_coarse_solve, combine_fv, extract_path, refine_grid, run_multilevel, run_multilevel_recording,
    run_multilevel_with, schedule_params, select_active, ActiveSet, BidirectionalValues, Level, LevelRecord,
    LevelSchedule, MlfmResult, RunOptions, ScheduleMode, ScheduleParams, DEFAULT_ETA_CONST,
};
pub use problems::{
    brute_force_values, paper_benchmark, paper_oracle, variable_speed_field, variable_speed_problem, AnalyticOracle,
    ProblemSpec, SpeedKind,
};
