//! Two-level and multi-level fast marching.
//!
//! Each coarse level is solved in both directions with partial fast
//! marching. Nodes whose combined value `F = v_s + v_d - v_s v_d` lies within
//! `eta` of its minimum are *active*; the next level only keeps fine nodes
//! within an l-infinity ball of radius `max(H - h, h)` around an active node.
//! The finest level is solved from the destination only.

use std::sync::Arc;
use std::time::Instant;

use crate::eikonal::{
    inverse_kruzkov, kruzkov, partial_fast_march_with, FrontSets, MarchOptions, SpeedField, ValueField,
};
use crate::error::{Direction, Error, Result};
use crate::grid::{BoxDomain, GridSpec, Region, RestrictedGrid};
use crate::problems::ProblemSpec;

/// `v_s + v_d - v_s v_d`, the Kruzkov transform of `T_s + T_d`.
pub fn combine_fv(v_s: f64, v_d: f64) -> Result<f64> {
    for v in [v_s, v_d] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::OutOfRange(v));
        }
    }
    Ok(v_s + v_d - v_s * v_d)
}

/// Values of the two directional solves on one level.
#[derive(Debug, Clone)]
pub struct BidirectionalValues {
    /// Solve started from the source set.
    pub from_src: ValueField,
    /// Solve started from the destination set.
    pub to_dst: ValueField,
    /// Nodes accepted by both solves, sorted.
    pub accepted_both: Vec<usize>,
}

impl BidirectionalValues {
    /// Nodes given a finite value by either solve.
    pub fn touched(&self) -> usize {
        self.from_src.iter().zip(self.to_dst.iter()).filter(|((_, a), (_, b))| a.is_finite() || b.is_finite()).count()
    }
}

/// Target nodes of `region` (padded by `pad`) on `grid`. When the region
/// falls between lattice nodes the pad grows by the cell half-diagonal so
/// that the nearest nodes stand in for it.
pub fn target_nodes(grid: &RestrictedGrid, region: &Region, pad: f64) -> Vec<usize> {
    let nodes = grid.nodes_near_region(region, pad);
    if !nodes.is_empty() {
        return nodes;
    }
    let base = grid.base();
    let half_diag = 0.5 * base.mesh_step() * (base.dim() as f64).sqrt();
    grid.nodes_near_region(region, pad + half_diag)
}

pub fn bidirectional_coarse_solve(
    grid: Arc<RestrictedGrid>,
    speed: &SpeedField,
    src: &Region,
    dst: &Region,
    eta_pad: f64,
) -> Result<BidirectionalValues> {
    bidirectional_coarse_solve_with(grid, speed, src, dst, eta_pad, MarchOptions::default())
}

/// Marches from `dst` until the `eta_pad`-neighbourhood of `src` is accepted
/// and from `src` until the neighbourhood of `dst` is accepted. The two solves
/// run on separate threads.
pub fn bidirectional_coarse_solve_with(
    grid: Arc<RestrictedGrid>,
    speed: &SpeedField,
    src: &Region,
    dst: &Region,
    eta_pad: f64,
    options: MarchOptions,
) -> Result<BidirectionalValues> {
    let to_dst_fronts = FrontSets::new(target_nodes(&grid, dst, 0.0), target_nodes(&grid, src, eta_pad));
    let from_src_fronts = FrontSets::new(target_nodes(&grid, src, 0.0), target_nodes(&grid, dst, eta_pad));
    for (fronts, direction) in [(&to_dst_fronts, Direction::ToDestination), (&from_src_fronts, Direction::FromSource)] {
        if fronts.start.is_empty() || fronts.end.is_empty() {
            return Err(Error::Unreachable { direction });
        }
    }

    let (to_dst, from_src) = std::thread::scope(|scope| {
        let g = grid.clone();
        let handle = scope.spawn(move || partial_fast_march_with(g, speed, &from_src_fronts, options));
        let to_dst = partial_fast_march_with(grid.clone(), speed, &to_dst_fronts, options);
        (to_dst, handle.join().expect("solver thread panicked"))
    });
    let (to_dst, from_src) = (to_dst?, from_src?);
    if !to_dst.end_reached() {
        return Err(Error::Unreachable { direction: Direction::ToDestination });
    }
    if !from_src.end_reached() {
        return Err(Error::Unreachable { direction: Direction::FromSource });
    }

    let mut accepted_both: Vec<usize> =
        from_src.acceptance_order().iter().copied().filter(|&n| to_dst.is_accepted(n)).collect();
    accepted_both.sort_unstable();
    Ok(BidirectionalValues { from_src, to_dst, accepted_both })
}

/// Active nodes of one level.
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveSet {
    pub grid: GridSpec,
    /// Sorted flat indices.
    pub nodes: Vec<usize>,
    pub threshold_used: f64,
    pub fmin: f64,
}

/// Entries of `values` within `eta` of the minimum value, sorted by flat
/// index, with that minimum.
pub fn threshold_sublevel(values: &[(usize, f64)], eta: f64) -> Result<(Vec<usize>, f64)> {
    if values.is_empty() {
        return Err(Error::EmptyIntersection);
    }
    if eta.is_nan() || eta <= 0.0 {
        return Err(Error::InvalidArgument(format!("threshold must be positive, got {eta}")));
    }
    let fmin = values.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let mut nodes: Vec<usize> = values.iter().filter(|p| p.1 <= fmin + eta).map(|p| p.0).collect();
    nodes.sort_unstable();
    Ok((nodes, fmin))
}

/// Combined values `F(x)` on the nodes accepted in both directions.
pub fn combined_values(bi: &BidirectionalValues) -> Result<Vec<(usize, f64)>> {
    bi.accepted_both
        .iter()
        .map(|&n| {
            let vs = kruzkov(bi.from_src.value_or_inf(n))?;
            let vd = kruzkov(bi.to_dst.value_or_inf(n))?;
            Ok((n, combine_fv(vs, vd)?))
        })
        .collect()
}

pub fn select_active(bi: &BidirectionalValues, eta: f64) -> Result<ActiveSet> {
    let values = combined_values(bi)?;
    let (nodes, fmin) = threshold_sublevel(&values, eta)?;
    Ok(ActiveSet { grid: bi.from_src.grid().base().clone(), nodes, threshold_used: eta, fmin })
}

/// Fine nodes within l-infinity distance `max(H - h, h)` of an active node.
pub fn refine_grid(active: &ActiveSet, coarse_step: f64, fine_spec: &GridSpec) -> Result<RestrictedGrid> {
    if active.nodes.is_empty() {
        return Err(Error::EmptyActive);
    }
    let h = fine_spec.mesh_step();
    if !(h > 0.0 && h <= coarse_step) {
        return Err(Error::InvalidArgument(format!("need 0 < h <= H, got h = {h}, H = {coarse_step}")));
    }
    let radius = (coarse_step - h).max(h);
    let mut members = Vec::new();
    for &node in &active.nodes {
        let p = active.grid.flat_to_point(node)?;
        let lo: Vec<f64> = p.iter().map(|x| x - radius).collect();
        let hi: Vec<f64> = p.iter().map(|x| x + radius).collect();
        if let Some(ranges) = fine_spec.index_box(&lo, &hi) {
            fine_spec.for_each_in_box(&ranges, |flat| members.push(flat));
        }
    }
    RestrictedGrid::from_members(fine_spec.clone(), members)
}

/// How the level steps are chosen from the target accuracy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleMode {
    /// One coarse level at `H = h^(1/(nu+1))`.
    TwoLevel,
    /// `N` levels at `H_l = h^((1 - nu^l)/(1 - nu^N))`.
    NLevel(usize),
    /// `N = floor(ln(1/eps)/gamma)` levels at `H_l = h^(l/N)`.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleParams {
    pub epsilon: f64,
    pub gamma: f64,
    pub beta: f64,
    pub eta_const: f64,
    pub dim: usize,
    pub mode: ScheduleMode,
}

/// Default threshold constant. Thresholds live in Kruzkov space where values
/// sit in `[0, 1)`, so `C_eta H` must stay well below 1 on the coarsest level
/// or every reachable node becomes active.
pub const DEFAULT_ETA_CONST: f64 = 0.2;

impl ScheduleParams {
    /// `gamma = 1`, `beta = 1/2`, `C_eta = DEFAULT_ETA_CONST`.
    pub fn new(epsilon: f64, dim: usize, mode: ScheduleMode) -> Self {
        Self { epsilon, gamma: 1.0, beta: 0.5, eta_const: DEFAULT_ETA_CONST, dim, mode }
    }

    /// Parameters whose finest step equals `h`.
    pub fn from_finest_h(h: f64, gamma: f64, dim: usize, mode: ScheduleMode) -> Self {
        Self { epsilon: h.powf(gamma), gamma, ..Self::new(h, dim, mode) }
    }

    /// `nu = gamma beta (1 - 1/d)`.
    pub fn nu(&self) -> f64 {
        self.gamma * self.beta * (1.0 - 1.0 / self.dim as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Level {
    pub step: f64,
    pub eta: f64,
}

/// Mesh steps (coarsest first) and selection thresholds of a multi-level run.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSchedule {
    pub finest_h: f64,
    pub levels: Vec<Level>,
    pub gamma: f64,
    pub eta_const: f64,
    /// Set when the level count floored to zero and a single level was used.
    pub fell_back: bool,
}

impl LevelSchedule {
    /// Builds a schedule from explicit steps; they must be strictly decreasing.
    pub fn from_steps(steps: &[f64], gamma: f64, eta_const: f64) -> Result<Self> {
        let Some(&finest_h) = steps.last() else {
            return Err(Error::InvalidArgument("schedule needs at least one level".into()));
        };
        if steps.iter().any(|h| !(h.is_finite() && *h > 0.0)) || steps.windows(2).any(|w| w[0] <= w[1]) {
            return Err(Error::InvalidArgument(format!(
                "mesh steps must be positive and strictly decreasing: {steps:?}"
            )));
        }
        if !(eta_const > 0.0 && gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::InvalidArgument("need eta_const > 0 and 0 < gamma <= 1".into()));
        }
        let levels = steps.iter().map(|&step| Level { step, eta: eta_const * step.powf(gamma) }).collect();
        Ok(Self { finest_h, levels, gamma, eta_const, fell_back: false })
    }

    /// Single full-grid level.
    pub fn classic(h: f64) -> Result<Self> {
        Self::from_steps(&[h], 1.0, 1.0)
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn steps(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.step).collect()
    }

    /// Rounds every step down to `L/k` for integer `k` (with `L` the longest
    /// box side) and drops levels that collapse onto a finer one.
    pub fn snapped(&self, domain: &BoxDomain) -> Result<Self> {
        let extent = domain.max_extent();
        let mut kept: Vec<f64> = Vec::new();
        for step in self.steps().into_iter().rev() {
            let k = (extent / step - 1e-9).ceil().max(1.0);
            let snapped = extent / k;
            if kept.last().is_none_or(|&finer| snapped > finer) {
                kept.push(snapped);
            }
        }
        kept.reverse();
        let mut out = Self::from_steps(&kept, self.gamma, self.eta_const)?;
        out.fell_back = self.fell_back;
        Ok(out)
    }
}

/// Level steps and thresholds for a target accuracy `epsilon`, before snapping.
/// The finest step is `epsilon^(1/gamma)`.
pub fn schedule_params(params: &ScheduleParams) -> Result<LevelSchedule> {
    let ScheduleParams { epsilon, gamma, beta, eta_const, dim, mode } = *params;
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidArgument(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::InvalidArgument(format!("gamma must lie in (0, 1], got {gamma}")));
    }
    let h = epsilon.powf(1.0 / gamma);
    let needs_nu = !matches!(mode, ScheduleMode::Auto);
    let nu = params.nu();
    if needs_nu && !(beta > 0.0 && beta <= 1.0 && nu > 0.0 && nu < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "two-level and n-level schedules need 0 < nu < 1 (gamma {gamma}, beta {beta}, d {dim})"
        )));
    }
    let mut fell_back = false;
    let steps: Vec<f64> = match mode {
        ScheduleMode::TwoLevel => vec![h.powf(1.0 / (nu + 1.0)), h],
        ScheduleMode::NLevel(n) => {
            if n == 0 {
                return Err(Error::InvalidArgument("level count must be at least 1".into()));
            }
            let denom = 1.0 - nu.powi(n as i32);
            (1..=n).map(|l| h.powf((1.0 - nu.powi(l as i32)) / denom)).collect()
        }
        ScheduleMode::Auto => {
            let raw = ((1.0 / epsilon).ln() / gamma).floor();
            let n = if raw < 1.0 {
                fell_back = true;
                1
            } else {
                raw as usize
            };
            (1..=n).map(|l| h.powf(l as f64 / n as f64)).collect()
        }
    };
    let mut schedule = LevelSchedule::from_steps(&steps, gamma, eta_const)?;
    schedule.fell_back = fell_back;
    Ok(schedule)
}

/// Per-level bookkeeping of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelRecord {
    /// 1-based level index.
    pub level: usize,
    pub mesh_step: f64,
    /// Threshold used to select this level's active nodes; `None` on the finest level.
    pub eta: Option<f64>,
    /// Member count of the level's (restricted) grid.
    pub grid_nodes: usize,
    pub accepted_from_src: Option<usize>,
    pub accepted_to_dst: usize,
    pub active: Option<usize>,
    /// Nodes given a finite value by any solve on this level.
    pub visited: usize,
    pub wall_ms: f64,
    /// Times this level's threshold was doubled after the next level failed.
    pub retries: usize,
}

#[derive(Debug, Clone)]
pub struct MlfmResult {
    pub final_values: ValueField,
    pub v_star: f64,
    pub tau_star: f64,
    /// Source node attaining `v_star` on the finest level.
    pub argmin_source: usize,
    pub per_level: Vec<LevelRecord>,
    /// Active sets of levels `1..N-1`, after any retries.
    pub active_sets: Vec<ActiveSet>,
    pub warnings: Vec<String>,
}

impl MlfmResult {
    pub fn total_visited(&self) -> usize {
        self.per_level.iter().map(|r| r.visited).sum()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    pub deadline: Option<Instant>,
    /// How many times a level's threshold may be doubled when the next level fails.
    pub max_retries: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { deadline: None, max_retries: 3 }
    }
}

pub fn run_multilevel(problem: &ProblemSpec, schedule: &LevelSchedule) -> Result<MlfmResult> {
    run_multilevel_with(problem, schedule, RunOptions::default())
}

struct CoarseLevel {
    bi: BidirectionalValues,
    active: ActiveSet,
}

/// Runs every level of `schedule`. When a level's end set cannot be reached
/// inside its restricted grid, the previous level's threshold is doubled and
/// the level rebuilt, at most `max_retries` times.
pub fn run_multilevel_with(problem: &ProblemSpec, schedule: &LevelSchedule, options: RunOptions) -> Result<MlfmResult> {
    run_multilevel_recording(problem, schedule, options, &mut Vec::new())
}

/// Like [`run_multilevel_with`], but every finished level is appended to
/// `records` as it completes, so a caller still holds the completed levels
/// when the run fails part way (for instance on a deadline). On success the
/// records are moved into the result and `records` is left empty.
pub fn run_multilevel_recording(
    problem: &ProblemSpec,
    schedule: &LevelSchedule,
    options: RunOptions,
    records: &mut Vec<LevelRecord>,
) -> Result<MlfmResult> {
    records.clear();
    if schedule.is_empty() {
        return Err(Error::InvalidArgument("empty schedule".into()));
    }
    let march = MarchOptions { deadline: options.deadline };
    let specs: Vec<GridSpec> =
        schedule.levels.iter().map(|l| GridSpec::new(problem.domain.clone(), l.step)).collect::<Result<_>>()?;
    let n = specs.len();
    let mut etas: Vec<f64> = schedule.levels.iter().map(|l| l.eta).collect();
    let mut warnings = Vec::new();
    if schedule.fell_back {
        warnings.push("level count floored below one; using a single full-grid level".to_string());
    }

    let mut coarse: Vec<CoarseLevel> = Vec::with_capacity(n.saturating_sub(1));
    let mut grid = Arc::new(RestrictedGrid::full(specs[0].clone()));
    let mut level = 0;
    let mut pending_ms = 0.0;

    // rebuilds the grid of `level` after doubling the threshold of `level - 1`
    let widen = |level: usize,
                 coarse: &mut Vec<CoarseLevel>,
                 records: &mut Vec<LevelRecord>,
                 etas: &mut Vec<f64>,
                 direction: Direction|
     -> Result<Arc<RestrictedGrid>> {
        if level == 0 || records[level - 1].retries >= options.max_retries {
            return Err(Error::LevelUnreachable { level: level + 1, direction });
        }
        let prev = level - 1;
        etas[prev] *= 2.0;
        let active = select_active(&coarse[prev].bi, etas[prev])?;
        let fine = refine_grid(&active, specs[prev].mesh_step(), &specs[level])?;
        records[prev].retries += 1;
        records[prev].eta = Some(etas[prev]);
        records[prev].active = Some(active.nodes.len());
        coarse[prev].active = active;
        Ok(Arc::new(fine))
    };

    while level + 1 < n {
        let started = Instant::now();
        let outcome = bidirectional_coarse_solve_with(
            grid.clone(),
            &problem.speed,
            &problem.src,
            &problem.dst,
            etas[level],
            march,
        );
        match outcome {
            Ok(bi) => {
                let active = select_active(&bi, etas[level])?;
                if active.nodes.iter().any(|&a| {
                    let p = specs[level].flat_to_point(a).expect("active nodes are valid");
                    problem.domain.distance_to_boundary(&p) <= 1e-12
                }) {
                    warnings.push(format!("level {}: active set touches the domain boundary", level + 1));
                }
                let fine = refine_grid(&active, specs[level].mesh_step(), &specs[level + 1])?;
                records.push(LevelRecord {
                    level: level + 1,
                    mesh_step: specs[level].mesh_step(),
                    eta: Some(etas[level]),
                    grid_nodes: grid.len(),
                    accepted_from_src: Some(bi.from_src.accepted_count()),
                    accepted_to_dst: bi.to_dst.accepted_count(),
                    active: Some(active.nodes.len()),
                    visited: bi.touched(),
                    wall_ms: pending_ms + started.elapsed().as_secs_f64() * 1e3,
                    retries: 0,
                });
                pending_ms = 0.0;
                coarse.push(CoarseLevel { bi, active });
                grid = Arc::new(fine);
                level += 1;
            }
            Err(Error::Unreachable { direction }) => {
                grid = widen(level, &mut coarse, records, &mut etas, direction)?;
                pending_ms += started.elapsed().as_secs_f64() * 1e3;
            }
            Err(e) => return Err(e),
        }
    }

    // finest level: destination -> source only
    loop {
        let started = Instant::now();
        let start = target_nodes(&grid, &problem.dst, 0.0);
        let end = target_nodes(&grid, &problem.src, 0.0);
        let field = if start.is_empty() || end.is_empty() {
            None
        } else {
            let f = partial_fast_march_with(grid.clone(), &problem.speed, &FrontSets::new(start, end.clone()), march)?;
            f.end_reached().then_some(f)
        };
        let Some(field) = field else {
            grid = widen(level, &mut coarse, records, &mut etas, Direction::ToDestination)?;
            pending_ms += started.elapsed().as_secs_f64() * 1e3;
            continue;
        };

        let (argmin_source, t_min) = end
            .iter()
            .map(|&e| (e, field.value_or_inf(e)))
            .fold((end[0], f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
        let v_star = kruzkov(t_min)?;
        let tau_star = inverse_kruzkov(v_star)?;
        records.push(LevelRecord {
            level: level + 1,
            mesh_step: specs[level].mesh_step(),
            eta: None,
            grid_nodes: grid.len(),
            accepted_from_src: None,
            accepted_to_dst: field.accepted_count(),
            active: None,
            visited: field.touched_count(),
            wall_ms: pending_ms + started.elapsed().as_secs_f64() * 1e3,
            retries: 0,
        });
        return Ok(MlfmResult {
            final_values: field,
            v_star,
            tau_star,
            argmin_source,
            per_level: std::mem::take(records),
            active_sets: coarse.into_iter().map(|c| c.active).collect(),
            warnings,
        });
    }
}

/// Discrete steepest descent on the finest destination values, from the
/// best source node to the destination set, over the `3^d - 1` neighbourhood.
pub fn extract_path(result: &MlfmResult, problem: &ProblemSpec) -> Result<Vec<Vec<f64>>> {
    if result.v_star.is_nan() || result.v_star >= 1.0 {
        return Err(Error::OutOfRange(result.v_star));
    }
    let field = &result.final_values;
    let grid = field.grid();
    let base = grid.base();
    let d = base.dim();
    let mut current = result.argmin_source;
    let mut path = vec![base.flat_to_point(current)?];
    let mut coords = vec![0; d];
    for _ in 0..grid.len() {
        let here = field.value_or_inf(current);
        if here == 0.0 || problem.dst.contains(path.last().expect("nonempty")) {
            return Ok(path);
        }
        base.decompose(current, &mut coords);
        let mut best: Option<(f64, usize)> = None;
        for code in 0..3usize.pow(d as u32) {
            let mut c = code;
            let mut nb = current as isize;
            let mut valid = true;
            let mut moved = false;
            for (axis, &at) in coords.iter().enumerate() {
                let off = (c % 3) as isize - 1;
                c /= 3;
                if off == 0 {
                    continue;
                }
                moved = true;
                let target = at as isize + off;
                if target < 0 || target >= base.counts()[axis] as isize {
                    valid = false;
                    break;
                }
                nb += off * base.strides()[axis] as isize;
            }
            if !valid || !moved {
                continue;
            }
            let nb = nb as usize;
            if !field.is_accepted(nb) {
                continue;
            }
            let v = field.value_or_inf(nb);
            if best.is_none_or(|(bv, bn)| v < bv || (v == bv && nb < bn)) {
                best = Some((v, nb));
            }
        }
        match best {
            Some((v, nb)) if v < here => {
                current = nb;
                path.push(base.flat_to_point(nb)?);
            }
            _ => return Err(Error::Plateau(current)),
        }
    }
    Err(Error::Plateau(current))
}
