//! Run reports and their CSV and JSON renderings.

use std::io::Write;

use serde::Serialize;

use crate::config::RunConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    BudgetExceeded,
    Error,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::BudgetExceeded => "budget_exceeded",
            Status::Error => "error",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelReport {
    pub level: usize,
    pub mesh_step: f64,
    /// Threshold used to select this level's active set; absent on the finest level.
    pub eta: Option<f64>,
    pub grid_nodes: usize,
    pub accepted_from_src: Option<usize>,
    pub accepted_to_dst: usize,
    pub active: Option<usize>,
    pub visited: usize,
    pub retries: usize,
    pub wall_ms: f64,
}

impl From<&mlfmm::LevelRecord> for LevelReport {
    fn from(r: &mlfmm::LevelRecord) -> Self {
        Self {
            level: r.level,
            mesh_step: r.mesh_step,
            eta: r.eta,
            grid_nodes: r.grid_nodes,
            accepted_from_src: r.accepted_from_src,
            accepted_to_dst: r.accepted_to_dst,
            active: r.active,
            visited: r.visited,
            retries: r.retries,
            wall_ms: r.wall_ms,
        }
    }
}

/// Sums over the per-level records of the reported repetition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Totals {
    pub visited_nodes: usize,
    pub wall_ms: f64,
}

/// Wall-clock time of every repetition and their median.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timing {
    pub samples_ms: Vec<f64>,
    pub median_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    /// Absent when the run's config could not be read at all.
    pub config: Option<RunConfig>,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    /// Finest mesh step after snapping to the domain.
    pub h: Option<f64>,
    pub levels: Vec<LevelReport>,
    pub totals: Totals,
    pub v_star: Option<f64>,
    pub tau_star: Option<f64>,
    pub oracle_tau_star: Option<f64>,
    pub error_vs_oracle: Option<f64>,
    pub timing: Timing,
    pub warnings: Vec<String>,
}

impl RunReport {
    /// A report for a run that never produced a level.
    pub fn failed(config: Option<RunConfig>, message: String) -> Self {
        Self {
            config,
            status: Status::Error,
            message: Some(message),
            h: None,
            levels: Vec::new(),
            totals: Totals { visited_nodes: 0, wall_ms: 0.0 },
            v_star: None,
            tau_star: None,
            oracle_tau_star: None,
            error_vs_oracle: None,
            timing: Timing { samples_ms: Vec::new(), median_ms: 0.0 },
            warnings: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialise")
    }
}

pub const CSV_HEADER: [&str; 13] = [
    "dim",
    "mode",
    "h",
    "levels",
    "eta_const",
    "gamma",
    "beta",
    "visited_nodes",
    "wall_ms",
    "v_star",
    "tau_star",
    "err",
    "status",
];

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn row(r: &RunReport) -> [String; 13] {
    let ok = r.status == Status::Ok;
    let c = r.config.as_ref();
    let field = |f: &dyn Fn(&RunConfig) -> String| c.map(f).unwrap_or_default();
    [
        field(&|c| c.dim.to_string()),
        field(&|c| c.mode.as_str().to_string()),
        opt(r.h.or(c.map(RunConfig::target_h))),
        if ok { r.levels.len().to_string() } else { String::new() },
        field(&|c| c.eta_const.to_string()),
        field(&|c| c.gamma.to_string()),
        field(&|c| c.beta.to_string()),
        if ok { r.totals.visited_nodes.to_string() } else { String::new() },
        if ok { r.timing.median_ms.to_string() } else { String::new() },
        opt(r.v_star),
        opt(r.tau_star),
        opt(r.error_vs_oracle),
        r.status.as_str().to_string(),
    ]
}

/// Writes the header and one row per report.
pub fn write_csv<W: Write>(out: W, reports: &[RunReport]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in reports {
        w.write_record(row(r))?;
    }
    w.flush()?;
    Ok(())
}

pub fn median(samples: &[f64]) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => s[n / 2],
        _ => 0.5 * (s[n / 2 - 1] + s[n / 2]),
    }
}
