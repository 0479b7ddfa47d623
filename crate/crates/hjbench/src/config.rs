//! Run configurations: TOML files plus command-line overrides.

use std::path::{Path, PathBuf};

use mlfmm::{LevelSchedule, ProblemSpec, ScheduleMode, ScheduleParams, SpeedKind, DEFAULT_ETA_CONST};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed config: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Classic,
    TwoLevel,
    MultiLevel,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Classic => "classic",
            Mode::TwoLevel => "two_level",
            Mode::MultiLevel => "multi_level",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "classic" => Ok(Mode::Classic),
            "two_level" => Ok(Mode::TwoLevel),
            "multi_level" => Ok(Mode::MultiLevel),
            other => Err(ConfigError::Invalid(format!("unknown mode {other:?}"))),
        }
    }
}

/// The benchmark instances a config can name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemName {
    /// Unit speed between two balls on the main diagonal of the unit box.
    Paper,
    Bump,
    TwoChannel,
}

impl ProblemName {
    pub fn as_str(&self) -> &'static str {
        match self {
            ProblemName::Paper => "paper",
            ProblemName::Bump => "bump",
            ProblemName::TwoChannel => "two_channel",
        }
    }
}

impl std::str::FromStr for ProblemName {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "paper" => Ok(ProblemName::Paper),
            "bump" => Ok(ProblemName::Bump),
            "two_channel" => Ok(ProblemName::TwoChannel),
            other => Err(ConfigError::Invalid(format!("unknown problem {other:?}"))),
        }
    }
}

fn default_gamma() -> f64 {
    1.0
}

fn default_beta() -> f64 {
    0.5
}

fn default_eta_const() -> f64 {
    DEFAULT_ETA_CONST
}

fn default_repetitions() -> usize {
    1
}

/// One benchmark run. Exactly one of `epsilon` and `finest_h` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemName,
    pub dim: usize,
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finest_h: Option<f64>,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_eta_const")]
    pub eta_const: f64,
    /// Fixed level count for `multi_level`; the automatic count when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<usize>,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget_secs: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

/// Command-line values that replace config entries.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub dim: Option<usize>,
    pub mode: Option<Mode>,
    pub h: Option<f64>,
    pub epsilon: Option<f64>,
    pub levels: Option<usize>,
    pub eta_const: Option<f64>,
    pub gamma: Option<f64>,
    pub beta: Option<f64>,
    pub problem: Option<ProblemName>,
    pub out: Option<PathBuf>,
    pub budget_secs: Option<f64>,
}

impl Overrides {
    /// Writes the overrides into a raw config table. Setting one of `h` and
    /// `epsilon` clears the other.
    fn apply(&self, table: &mut Table) {
        let mut set = |key: &str, value: Option<Value>| {
            if let Some(v) = value {
                table.insert(key.to_string(), v);
            }
        };
        set("dim", self.dim.map(|d| Value::Integer(d as i64)));
        set("mode", self.mode.map(|m| Value::String(m.as_str().into())));
        set("finest_h", self.h.map(Value::Float));
        set("epsilon", self.epsilon.map(Value::Float));
        set("levels", self.levels.map(|n| Value::Integer(n as i64)));
        set("eta_const", self.eta_const.map(Value::Float));
        set("gamma", self.gamma.map(Value::Float));
        set("beta", self.beta.map(Value::Float));
        set("problem", self.problem.map(|p| Value::String(problem_str(p).into())));
        set("out", self.out.as_ref().map(|p| Value::String(p.display().to_string())));
        set("budget_secs", self.budget_secs.map(Value::Float));
        if self.h.is_some() && self.epsilon.is_none() {
            table.remove("epsilon");
        }
        if self.epsilon.is_some() && self.h.is_none() {
            table.remove("finest_h");
        }
    }
}

fn problem_str(p: ProblemName) -> &'static str {
    match p {
        ProblemName::Paper => "paper",
        ProblemName::Bump => "bump",
        ProblemName::TwoChannel => "two_channel",
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: String| Err(ConfigError::Invalid(msg));
        match (self.epsilon, self.finest_h) {
            (Some(_), Some(_)) => return bad("give only one of epsilon and finest_h".into()),
            (None, None) => return bad("one of epsilon and finest_h is required".into()),
            (Some(e), None) if !(e > 0.0 && e < 1.0) => return bad(format!("epsilon must lie in (0, 1), got {e}")),
            (None, Some(h)) if !(h > 0.0 && h < 1.0) => return bad(format!("finest_h must lie in (0, 1), got {h}")),
            _ => {}
        }
        if self.repetitions < 1 {
            return bad("repetitions must be at least 1".into());
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad(format!("gamma must lie in (0, 1], got {}", self.gamma));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return bad(format!("beta must lie in (0, 1], got {}", self.beta));
        }
        if !self.eta_const.is_finite() || self.eta_const <= 0.0 {
            return bad(format!("eta_const must be positive, got {}", self.eta_const));
        }
        if self.dim < 1 || (self.problem == ProblemName::Paper && self.dim < 2) {
            return bad(format!("dimension {} not supported for this problem", self.dim));
        }
        if self.dim > 6 {
            return bad(format!("dimension {} is beyond desk scale", self.dim));
        }
        if let Some(n) = self.levels {
            if n < 1 {
                return bad("levels must be at least 1".into());
            }
            if self.mode != Mode::MultiLevel {
                return bad("levels only applies to multi_level".into());
            }
        }
        if let Some(b) = self.budget_secs {
            if b.is_nan() || b <= 0.0 {
                return bad(format!("budget_secs must be positive, got {b}"));
            }
        }
        Ok(())
    }

    /// The finest mesh step, before snapping.
    pub fn target_h(&self) -> f64 {
        match (self.finest_h, self.epsilon) {
            (Some(h), _) => h,
            (None, Some(e)) => e.powf(1.0 / self.gamma),
            (None, None) => f64::NAN,
        }
    }

    pub fn problem_spec(&self) -> mlfmm::Result<ProblemSpec> {
        match self.problem {
            ProblemName::Paper => mlfmm::paper_benchmark(self.dim),
            ProblemName::Bump => mlfmm::variable_speed_problem(SpeedKind::Bump, self.dim),
            ProblemName::TwoChannel => mlfmm::variable_speed_problem(SpeedKind::TwoChannel, self.dim),
        }
    }

    /// The snapped level schedule for `domain`.
    pub fn schedule(&self, problem: &ProblemSpec) -> mlfmm::Result<LevelSchedule> {
        let mode = match (self.mode, self.levels) {
            (Mode::Classic, _) => return LevelSchedule::classic(self.target_h())?.snapped(&problem.domain),
            (Mode::TwoLevel, _) => ScheduleMode::TwoLevel,
            (Mode::MultiLevel, Some(n)) => ScheduleMode::NLevel(n),
            (Mode::MultiLevel, None) => ScheduleMode::Auto,
        };
        let params = ScheduleParams {
            epsilon: self.target_h().powf(self.gamma),
            gamma: self.gamma,
            beta: self.beta,
            eta_const: self.eta_const,
            dim: self.dim,
            mode,
        };
        mlfmm::schedule_params(&params)?.snapped(&problem.domain)
    }
}

fn read(path: &Path) -> Result<Table, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    text.parse::<Table>().map_err(|e| ConfigError::Parse(e.to_string()))
}

/// A sweep entry that failed to decode or validate, with whatever could be read.
#[derive(Debug)]
pub struct InvalidRun {
    pub echo: Option<Box<RunConfig>>,
    pub error: ConfigError,
}

fn decode_entry(table: Table) -> Result<RunConfig, InvalidRun> {
    let config: RunConfig = Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| InvalidRun { echo: None, error: ConfigError::Invalid(e.to_string()) })?;
    match config.validate() {
        Ok(()) => Ok(config),
        Err(error) => Err(InvalidRun { echo: Some(Box::new(config)), error }),
    }
}

fn decode(table: Table) -> Result<RunConfig, ConfigError> {
    decode_entry(table).map_err(|e| e.error)
}

/// Loads a single-run config. Top-level keys are the run's fields.
pub fn load_run(path: &Path, overrides: &Overrides) -> Result<RunConfig, ConfigError> {
    let mut table = read(path)?;
    overrides.apply(&mut table);
    decode(table)
}

/// A loaded sweep: one entry per run, in order, and the CSV destination.
#[derive(Debug)]
pub struct Sweep {
    pub entries: Vec<Result<RunConfig, InvalidRun>>,
    pub out: Option<PathBuf>,
}

/// Loads a sweep. A top-level `out` names the CSV file. Other top-level keys
/// besides `run` and `grid` are shared defaults. Each `[[run]]` table adds one
/// run. A `[grid]` table of arrays adds the cartesian product of its entries,
/// in key order with the last key varying fastest. Runs that fail validation
/// come back as errors in place so the sweep can report them. The `out`
/// override is not applied to the runs.
pub fn load_sweep(path: &Path, overrides: &Overrides) -> Result<Sweep, ConfigError> {
    let mut table = read(path)?;
    let out = match table.remove("out") {
        None => None,
        Some(Value::String(s)) => Some(PathBuf::from(s)),
        Some(_) => return Err(ConfigError::Parse("`out` must be a string".into())),
    };
    let out = overrides.out.clone().or(out);
    let overrides = Overrides { out: None, ..overrides.clone() };
    let runs = match table.remove("run") {
        None => Vec::new(),
        Some(Value::Array(items)) => items,
        Some(_) => return Err(ConfigError::Parse("`run` must be an array of tables".into())),
    };
    let grid = match table.remove("grid") {
        None => None,
        Some(Value::Table(t)) => Some(t),
        Some(_) => return Err(ConfigError::Parse("`grid` must be a table".into())),
    };

    let mut raw = Vec::new();
    for item in runs {
        let Value::Table(run) = item else {
            return Err(ConfigError::Parse("every `run` entry must be a table".into()));
        };
        let mut merged = table.clone();
        merged.extend(run);
        raw.push(merged);
    }
    if let Some(grid) = grid {
        let mut combos = vec![table.clone()];
        for (key, values) in grid {
            let Value::Array(values) = values else {
                return Err(ConfigError::Parse(format!("grid entry `{key}` must be an array")));
            };
            let mut next = Vec::with_capacity(combos.len() * values.len());
            for base in &combos {
                for v in &values {
                    let mut t = base.clone();
                    // a grid over one step kind replaces the other
                    match key.as_str() {
                        "finest_h" => drop(t.remove("epsilon")),
                        "epsilon" => drop(t.remove("finest_h")),
                        _ => {}
                    }
                    t.insert(key.clone(), v.clone());
                    next.push(t);
                }
            }
            combos = next;
        }
        raw.extend(combos);
    }
    if raw.is_empty() {
        return Err(ConfigError::Invalid("sweep lists no runs".into()));
    }
    let entries = raw
        .into_iter()
        .map(|mut t| {
            overrides.apply(&mut t);
            decode_entry(t)
        })
        .collect();
    Ok(Sweep { entries, out })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        decode(text.parse::<Table>().unwrap())
    }

    #[test]
    fn minimal_config_uses_defaults() {
        let c = parse("problem = \"paper\"\ndim = 2\nmode = \"classic\"\nfinest_h = 0.02\n").unwrap();
        assert_eq!(c.gamma, 1.0);
        assert_eq!(c.beta, 0.5);
        assert_eq!(c.eta_const, DEFAULT_ETA_CONST);
        assert_eq!(c.repetitions, 1);
        assert_eq!(c.target_h(), 0.02);
    }

    #[test]
    fn step_must_be_given_exactly_once() {
        assert!(parse("problem = \"paper\"\ndim = 2\nmode = \"classic\"\n").is_err());
        assert!(parse("problem = \"paper\"\ndim = 2\nmode = \"classic\"\nfinest_h = 0.1\nepsilon = 0.1\n").is_err());
    }

    #[test]
    fn rejects_bad_values() {
        let base = "problem = \"paper\"\nmode = \"classic\"\nfinest_h = 0.1\n";
        assert!(parse(&format!("{base}dim = 2\nrepetitions = 0\n")).is_err());
        assert!(parse(&format!("{base}dim = 1\n")).is_err());
        assert!(parse(&format!("{base}dim = 2\nlevels = 3\n")).is_err());
        assert!(parse(&format!("{base}dim = 2\nspeed = 3\n")).is_err());
        assert!(parse(&format!("{base}dim = 2\ngamma = 1.5\n")).is_err());
    }

    #[test]
    fn overrides_replace_the_step_kind() {
        let mut t: Table = "problem = \"paper\"\ndim = 2\nmode = \"classic\"\nfinest_h = 0.1\n".parse().unwrap();
        Overrides { epsilon: Some(0.05), dim: Some(3), ..Default::default() }.apply(&mut t);
        let c = decode(t).unwrap();
        assert_eq!(c.finest_h, None);
        assert_eq!(c.epsilon, Some(0.05));
        assert_eq!(c.dim, 3);
    }

    #[test]
    fn epsilon_maps_through_gamma() {
        let c = parse("problem = \"paper\"\ndim = 2\nmode = \"classic\"\nepsilon = 0.25\ngamma = 0.5\n").unwrap();
        assert!((c.target_h() - 0.0625).abs() < 1e-15);
    }
}
