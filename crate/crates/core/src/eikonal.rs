//! First-order upwind update for the isotropic eikonal equation and the
//! heap-driven partial fast marching loop.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::grid::RestrictedGrid;

type SpeedFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Isotropic speed `f(x)` with known bounds `0 < lo <= f <= hi`.
#[derive(Clone)]
pub struct SpeedField {
    eval: SpeedFn,
    lo: f64,
    hi: f64,
}

impl SpeedField {
    pub fn new<F>(lo: f64, hi: f64, eval: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "speed bounds must satisfy 0 < lo <= hi < inf, got [{lo}, {hi}]"
            )));
        }
        Ok(Self { eval: Arc::new(eval), lo, hi })
    }

    pub fn constant(value: f64) -> Result<Self> {
        Self::new(value, value, move |_| value)
    }

    #[inline]
    pub fn at(&self, p: &[f64]) -> f64 {
        (self.eval)(p)
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }
}

impl fmt::Debug for SpeedField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpeedField").field("lo", &self.lo).field("hi", &self.hi).finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeState {
    Far,
    Narrow,
    Accepted,
}

/// Start and end node sets (flat indices) for a partial march.
/// An empty `end` asks for a full sweep.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FrontSets {
    pub start: Vec<usize>,
    pub end: Vec<usize>,
}

impl FrontSets {
    pub fn new(start: Vec<usize>, end: Vec<usize>) -> Self {
        Self { start, end }
    }

    pub fn full_sweep(start: Vec<usize>) -> Self {
        Self { start, end: Vec::new() }
    }
}

/// Minimum-time values on the members of a restricted grid.
#[derive(Debug, Clone)]
pub struct ValueField {
    grid: Arc<RestrictedGrid>,
    values: Vec<f64>,
    states: Vec<NodeState>,
    acceptance_order: Vec<usize>,
    end_reached: bool,
}

impl ValueField {
    /// Field with every member Far.
    pub(crate) fn unsolved(grid: Arc<RestrictedGrid>) -> Self {
        let n = grid.len();
        Self {
            grid,
            values: vec![f64::INFINITY; n],
            states: vec![NodeState::Far; n],
            acceptance_order: Vec::new(),
            end_reached: false,
        }
    }

    /// Builds a field from explicit accepted values; every other member is Far.
    /// Acceptance order follows increasing value, ties by flat index.
    pub fn from_accepted(grid: Arc<RestrictedGrid>, accepted: &[(usize, f64)]) -> Result<Self> {
        let mut field = Self::unsolved(grid);
        let mut sorted = accepted.to_vec();
        sorted.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        for (flat, t) in sorted {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::OutOfRange(t));
            }
            let local = field.grid.local_index(flat).ok_or(Error::NotAMember(flat))?;
            field.values[local] = t;
            field.states[local] = NodeState::Accepted;
            field.acceptance_order.push(flat);
        }
        field.end_reached = true;
        Ok(field)
    }

    pub fn grid(&self) -> &Arc<RestrictedGrid> {
        &self.grid
    }

    /// Value at a member node; `+inf` for Far nodes, `None` for non-members.
    pub fn value(&self, flat: usize) -> Option<f64> {
        self.grid.local_index(flat).map(|l| self.values[l])
    }

    /// Value at a member node, `+inf` for anything else.
    pub fn value_or_inf(&self, flat: usize) -> f64 {
        self.value(flat).unwrap_or(f64::INFINITY)
    }

    pub fn state(&self, flat: usize) -> Option<NodeState> {
        self.grid.local_index(flat).map(|l| self.states[l])
    }

    pub fn is_accepted(&self, flat: usize) -> bool {
        self.state(flat) == Some(NodeState::Accepted)
    }

    /// Accepted nodes in the order they were accepted.
    pub fn acceptance_order(&self) -> &[usize] {
        &self.acceptance_order
    }

    pub fn accepted_count(&self) -> usize {
        self.acceptance_order.len()
    }

    /// Nodes that received a finite value (Accepted or Narrow).
    pub fn touched_count(&self) -> usize {
        self.states.iter().filter(|s| **s != NodeState::Far).count()
    }

    /// Whether the run stopped because every end node was accepted
    /// (always true for a completed full sweep).
    pub fn end_reached(&self) -> bool {
        self.end_reached
    }

    /// `(flat, value)` for every member, in flat order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values.iter().enumerate().map(|(l, &v)| (self.grid.member_at(l), v))
    }
}

/// Unique root `U` of `sum_i max(U - a_i, 0)^2 = rhs^2` over the finite
/// entries of `neighbors`; `+inf` when none is finite.
pub fn upwind_root(neighbors: &[f64], rhs: f64) -> f64 {
    let mut a: Vec<f64> = neighbors.iter().copied().filter(|v| v.is_finite()).collect();
    a.sort_by(f64::total_cmp);
    root_sorted(&a, rhs)
}

/// Incremental solve over ascending `a`: add axes while the current root
/// exceeds the next neighbour value.
fn root_sorted(a: &[f64], rhs: f64) -> f64 {
    let Some(&first) = a.first() else {
        return f64::INFINITY;
    };
    let rhs2 = rhs * rhs;
    let mut u = first + rhs;
    let (mut sum, mut sum_sq) = (first, first * first);
    for (k, &ak) in a.iter().enumerate().skip(1) {
        if u <= ak {
            break;
        }
        sum += ak;
        sum_sq += ak * ak;
        let n = (k + 1) as f64;
        let disc = sum * sum - n * (sum_sq - rhs2);
        // u > ak guarantees disc >= 0 in exact arithmetic
        let root = (sum + disc.max(0.0).sqrt()) / n;
        u = root.max(ak);
    }
    u
}

/// Applies the upwind update at member `x` using neighbour values from `values`
/// (`+inf` marks Far or absent values).
pub fn local_update(grid: &RestrictedGrid, speed: &SpeedField, values: impl Fn(usize) -> f64, x: usize) -> Result<f64> {
    if !grid.contains(x) {
        return Err(Error::NotAMember(x));
    }
    let base = grid.base();
    let mut coords = vec![0; base.dim()];
    let mut point = vec![0.0; base.dim()];
    base.point_into(x, &mut coords, &mut point);
    let mut a = Vec::with_capacity(base.dim());
    for axis in 0..base.dim() {
        let lo = grid.step(x, &coords, axis, false).map_or(f64::INFINITY, &values);
        let hi = grid.step(x, &coords, axis, true).map_or(f64::INFINITY, &values);
        let m = lo.min(hi);
        if m.is_finite() {
            a.push(m);
        }
    }
    a.sort_by(f64::total_cmp);
    Ok(root_sorted(&a, base.mesh_step() / speed.at(&point)))
}

/// Options for a single march.
#[derive(Debug, Clone, Copy, Default)]
pub struct MarchOptions {
    /// Abort with [`Error::BudgetExceeded`] once this instant has passed.
    pub deadline: Option<Instant>,
}

#[derive(Debug, Clone, Copy)]
struct HeapEntry {
    t: f64,
    flat: usize,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for HeapEntry {}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapEntry {
    // reversed so BinaryHeap pops the smallest (t, flat)
    fn cmp(&self, other: &Self) -> Ordering {
        other.t.total_cmp(&self.t).then_with(|| other.flat.cmp(&self.flat))
    }
}

pub fn partial_fast_march(grid: Arc<RestrictedGrid>, speed: &SpeedField, fronts: &FrontSets) -> Result<ValueField> {
    partial_fast_march_with(grid, speed, fronts, MarchOptions::default())
}

/// Partial fast marching: accepts the start set at `T = 0`, then repeatedly
/// accepts the smallest Narrow value until the Narrow band empties or every
/// end node is accepted.
pub fn partial_fast_march_with(
    grid: Arc<RestrictedGrid>,
    speed: &SpeedField,
    fronts: &FrontSets,
    options: MarchOptions,
) -> Result<ValueField> {
    if fronts.start.is_empty() {
        return Err(Error::EmptyStart);
    }
    let mut start = fronts.start.clone();
    start.sort_unstable();
    start.dedup();
    for &s in &start {
        if !grid.contains(s) {
            return Err(Error::NotAMember(s));
        }
    }

    let mut field = ValueField::unsolved(grid.clone());
    let mut is_end = vec![false; grid.len()];
    let mut remaining: Option<usize> = None;
    if !fronts.end.is_empty() {
        let mut count = 0;
        for &e in &fronts.end {
            let local = grid.local_index(e).ok_or(Error::NotAMember(e))?;
            if !is_end[local] {
                is_end[local] = true;
                count += 1;
            }
        }
        remaining = Some(count);
    }

    let mut march = Marcher {
        grid: &grid,
        speed,
        values: &mut field.values,
        states: &mut field.states,
        heap: BinaryHeap::new(),
        coords: vec![0; grid.base().dim()],
        nb_coords: vec![0; grid.base().dim()],
        point: vec![0.0; grid.base().dim()],
        a: Vec::with_capacity(grid.base().dim()),
    };

    for &s in &start {
        let local = grid.local_index(s).expect("checked above");
        march.values[local] = 0.0;
        march.states[local] = NodeState::Accepted;
        field.acceptance_order.push(s);
        if is_end[local] {
            if let Some(r) = remaining.as_mut() {
                *r -= 1;
            }
        }
    }
    for &s in &start {
        march.relax_neighbors(s);
    }

    let mut pops: u32 = 0;
    while remaining != Some(0) {
        let Some(entry) = march.heap.pop() else { break };
        let local = grid.local_index(entry.flat).expect("heap holds members");
        if march.states[local] == NodeState::Accepted || march.values[local] != entry.t {
            continue;
        }
        march.states[local] = NodeState::Accepted;
        field.acceptance_order.push(entry.flat);
        if is_end[local] {
            if let Some(r) = remaining.as_mut() {
                *r -= 1;
            }
        }
        march.relax_neighbors(entry.flat);

        pops = pops.wrapping_add(1);
        if pops.is_multiple_of(1024) {
            if let Some(deadline) = options.deadline {
                if Instant::now() >= deadline {
                    return Err(Error::BudgetExceeded);
                }
            }
        }
    }
    field.end_reached = remaining.is_none_or(|r| r == 0);
    Ok(field)
}

struct Marcher<'a> {
    grid: &'a RestrictedGrid,
    speed: &'a SpeedField,
    values: &'a mut Vec<f64>,
    states: &'a mut Vec<NodeState>,
    heap: BinaryHeap<HeapEntry>,
    coords: Vec<usize>,
    nb_coords: Vec<usize>,
    point: Vec<f64>,
    a: Vec<f64>,
}

impl Marcher<'_> {
    fn relax_neighbors(&mut self, flat: usize) {
        let base = self.grid.base();
        base.decompose(flat, &mut self.coords);
        for axis in 0..base.dim() {
            for forward in [false, true] {
                let Some(nb) = self.grid.step(flat, &self.coords, axis, forward) else { continue };
                let local = self.grid.local_index(nb).expect("step yields members");
                if self.states[local] == NodeState::Accepted {
                    continue;
                }
                let u = self.update(nb);
                if u != self.values[local] {
                    self.values[local] = u;
                    self.states[local] = NodeState::Narrow;
                    self.heap.push(HeapEntry { t: u, flat: nb });
                }
            }
        }
    }

    fn update(&mut self, x: usize) -> f64 {
        let base = self.grid.base();
        base.point_into(x, &mut self.nb_coords, &mut self.point);
        self.a.clear();
        for axis in 0..base.dim() {
            let mut m = f64::INFINITY;
            for forward in [false, true] {
                if let Some(nb) = self.grid.step(x, &self.nb_coords, axis, forward) {
                    let v = self.values[self.grid.local_index(nb).expect("member")];
                    m = m.min(v);
                }
            }
            if m.is_finite() {
                self.a.push(m);
            }
        }
        self.a.sort_by(f64::total_cmp);
        root_sorted(&self.a, base.mesh_step() / self.speed.at(&self.point))
    }
}

/// Change of variable `v = 1 - exp(-T)`; `+inf` maps to 1.
pub fn kruzkov(t: f64) -> Result<f64> {
    if t.is_nan() || t < 0.0 {
        return Err(Error::OutOfRange(t));
    }
    Ok(-(-t).exp_m1())
}

/// Inverse of [`kruzkov`]: `T = -ln(1 - v)` for `0 <= v < 1`.
pub fn inverse_kruzkov(v: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&v) {
        return Err(Error::OutOfRange(v));
    }
    Ok(-(-v).ln_1p())
}
