//! Canonical problem instances and independent reference solutions.

use crate::eikonal::SpeedField;
use crate::error::{Error, Result};
use crate::grid::{euclid, BoxDomain, Region, RestrictedGrid};

/// Radius of the source and destination balls of the benchmark instance.
pub const BALL_RADIUS: f64 = 0.1;
/// Per-axis coordinate of the source ball centre.
pub const SRC_CENTER: f64 = 0.2;
/// Per-axis coordinate of the destination ball centre.
pub const DST_CENTER: f64 = 0.8;

/// Minimum-time problem: reach `dst` from `src` inside `domain` at speed `speed`.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub domain: BoxDomain,
    pub src: Region,
    pub dst: Region,
    pub speed: SpeedField,
}

impl ProblemSpec {
    pub fn new(
        name: impl Into<String>,
        domain: BoxDomain,
        src: Region,
        dst: Region,
        speed: SpeedField,
    ) -> Result<Self> {
        for (label, r) in [("source", &src), ("destination", &dst)] {
            if r.dim() != Some(domain.dim()) {
                return Err(Error::InvalidArgument(format!("{label} region dimension does not match domain")));
            }
            if let Region::Ball { center, radius } = r {
                if !domain.contains(center) || domain.distance_to_boundary(center) <= *radius {
                    return Err(Error::InvalidArgument(format!("{label} ball must lie strictly inside the domain")));
                }
            }
        }
        if let (Region::Ball { center: c1, radius: r1 }, Region::Ball { center: c2, radius: r2 }) = (&src, &dst) {
            if euclid(c1, c2) <= r1 + r2 {
                return Err(Error::InvalidArgument("source and destination overlap".into()));
            }
        }
        Ok(Self { name: name.into(), domain, src, dst, speed })
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }
}

/// Closed-form solution of the constant-speed benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticOracle {
    dst_center: Vec<f64>,
    dst_radius: f64,
    /// Endpoints of the optimal segment, on the source and destination ball boundaries.
    pub segment: (Vec<f64>, Vec<f64>),
    pub tau_star: f64,
}

impl AnalyticOracle {
    /// Exact minimum time from `p` to the destination ball at unit speed.
    pub fn value_at(&self, p: &[f64]) -> f64 {
        (euclid(p, &self.dst_center) - self.dst_radius).max(0.0)
    }

    /// `samples + 1` equally spaced points along the optimal segment.
    pub fn geodesic_points(&self, samples: usize) -> Vec<Vec<f64>> {
        let (a, b) = &self.segment;
        (0..=samples)
            .map(|k| {
                let s = k as f64 / samples.max(1) as f64;
                a.iter().zip(b).map(|(x, y)| x + s * (y - x)).collect()
            })
            .collect()
    }
}

/// Constant unit speed in `(0,1)^d` between balls of radius 0.1 centred at
/// `(0.2,...,0.2)` and `(0.8,...,0.8)`.
pub fn paper_benchmark(d: usize) -> Result<ProblemSpec> {
    benchmark_geometry("paper", d, SpeedField::constant(1.0)?)
}

pub fn paper_oracle(d: usize) -> Result<AnalyticOracle> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!("benchmark needs d >= 2, got {d}")));
    }
    let step = BALL_RADIUS / (d as f64).sqrt();
    let a = vec![SRC_CENTER + step; d];
    let b = vec![DST_CENTER - step; d];
    Ok(AnalyticOracle {
        dst_center: vec![DST_CENTER; d],
        dst_radius: BALL_RADIUS,
        segment: (a, b),
        tau_star: (DST_CENTER - SRC_CENTER) * (d as f64).sqrt() - 2.0 * BALL_RADIUS,
    })
}

fn benchmark_geometry(name: &str, d: usize, speed: SpeedField) -> Result<ProblemSpec> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!("benchmark needs d >= 2, got {d}")));
    }
    ProblemSpec::new(
        name,
        BoxDomain::unit(d)?,
        Region::ball(vec![SRC_CENTER; d], BALL_RADIUS),
        Region::ball(vec![DST_CENTER; d], BALL_RADIUS),
        speed,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpeedKind {
    /// Fast Gaussian lens at the domain centre.
    Bump,
    /// Slow slab across the main diagonal, pierced by two gaps.
    TwoChannel,
}

/// Slab geometry of [`SpeedKind::TwoChannel`], in the rotated frame
/// `p = (x0 + x1 - 1)/sqrt 2` (across the slab), `t = (x0 - x1)/sqrt 2` (along it).
pub mod two_channel {
    pub const SLOW: f64 = 0.2;
    pub const HALF_WIDTH: f64 = 0.06;
    pub const RAMP: f64 = 0.02;
    /// Gap centres along the slab; asymmetric so the optimal route is unique.
    pub const GAPS: [f64; 2] = [0.2, -0.3];
    pub const GAP_HALF_WIDTH: f64 = 0.08;
}

pub fn variable_speed_field(kind: SpeedKind, d: usize) -> Result<SpeedField> {
    match kind {
        SpeedKind::Bump => SpeedField::new(1.0, 1.5, move |x: &[f64]| {
            let r2: f64 = x.iter().map(|v| (v - 0.5) * (v - 0.5)).sum();
            1.0 + 0.5 * (-r2 / 0.02).exp()
        }),
        SpeedKind::TwoChannel => {
            if d < 2 {
                return Err(Error::InvalidArgument("two-channel field needs d >= 2".into()));
            }
            use two_channel::*;
            SpeedField::new(SLOW, 1.0, |x: &[f64]| {
                let p = (x[0] + x[1] - 1.0) / std::f64::consts::SQRT_2;
                let t = (x[0] - x[1]) / std::f64::consts::SQRT_2;
                let ramp = |gap: f64| (gap / RAMP).clamp(0.0, 1.0);
                let band = ramp(HALF_WIDTH + RAMP - p.abs());
                let open = GAPS.iter().map(|g| ramp((t - g).abs() - GAP_HALF_WIDTH)).product::<f64>();
                SLOW + (1.0 - SLOW) * (1.0 - band * open)
            })
        }
    }
}

/// Benchmark geometry with a variable speed field.
pub fn variable_speed_problem(kind: SpeedKind, d: usize) -> Result<ProblemSpec> {
    let name = match kind {
        SpeedKind::Bump => "bump",
        SpeedKind::TwoChannel => "two_channel",
    };
    benchmark_geometry(name, d, variable_speed_field(kind, d)?)
}

/// Reference root of `sum_i max(U - a_i, 0)^2 = rhs^2` computed as the
/// smallest admissible root over every subset of finite neighbour values.
fn subset_min_root(a: &[f64], rhs: f64) -> f64 {
    let finite: Vec<f64> = a.iter().copied().filter(|v| v.is_finite()).collect();
    let mut best = f64::INFINITY;
    for mask in 1u32..(1 << finite.len()) {
        let used: Vec<f64> = (0..finite.len()).filter(|i| mask & (1 << i) != 0).map(|i| finite[i]).collect();
        // solve relative to the smallest value so large times keep their precision
        let shift = used.iter().copied().fold(f64::INFINITY, f64::min);
        let n = used.len() as f64;
        let s: f64 = used.iter().map(|v| v - shift).sum();
        let s2: f64 = used.iter().map(|v| (v - shift) * (v - shift)).sum();
        let disc = s * s - n * (s2 - rhs * rhs);
        if disc < 0.0 {
            continue;
        }
        let u = (s + disc.sqrt()) / n;
        let top = used.iter().map(|v| v - shift).fold(f64::NEG_INFINITY, f64::max);
        if u >= top && shift + u < best {
            best = shift + u;
        }
    }
    best
}

const BRUTE_FORCE_TOL: f64 = 1e-13;
const BRUTE_FORCE_MAX_SWEEPS: usize = 20_000;

/// Gauss-Seidel value iteration of the upwind fixed point, sweeping the grid
/// in all `2^d` axis orientations until a full cycle changes no value by more
/// than `1e-13`. Values are returned in member order; unreachable nodes stay `+inf`.
pub fn brute_force_values(g: &RestrictedGrid, speed: &SpeedField, start: &[usize]) -> Result<Vec<f64>> {
    let base = g.base();
    let d = base.dim();
    let h = base.mesh_step();
    let n = g.len();
    let mut values = vec![f64::INFINITY; n];
    let mut fixed = vec![false; n];
    for &s in start {
        let l = g.local_index(s).ok_or(Error::NotAMember(s))?;
        values[l] = 0.0;
        fixed[l] = true;
    }
    if start.is_empty() {
        return Ok(values);
    }
    let members: Vec<usize> = g.members().collect();
    let rhs: Vec<f64> = members
        .iter()
        .map(|&m| {
            let p = base.flat_to_point(m).expect("member");
            h / speed.at(&p)
        })
        .collect();
    let coords: Vec<Vec<usize>> = members.iter().map(|&m| base.multi_index(m).expect("member")).collect();

    let orientations = 1usize << d;
    // member order per orientation: axis k runs backwards when bit k is set
    let orders: Vec<Vec<usize>> = (0..orientations)
        .map(|mask| {
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by_key(|&l| {
                coords[l]
                    .iter()
                    .enumerate()
                    .map(|(k, &c)| if mask & (1 << k) != 0 { base.counts()[k] - 1 - c } else { c })
                    .collect::<Vec<_>>()
            });
            order
        })
        .collect();
    let mut quiet = 0;
    let mut a = vec![0.0; d];
    for sweep in 0..BRUTE_FORCE_MAX_SWEEPS {
        let mut change: f64 = 0.0;
        for &l in &orders[sweep % orientations] {
            if fixed[l] {
                continue;
            }
            let flat = members[l];
            for (axis, slot) in a.iter_mut().enumerate() {
                let stride = base.strides()[axis];
                let c = coords[l][axis];
                let lo = (c > 0)
                    .then(|| flat - stride)
                    .and_then(|nb| g.local_index(nb))
                    .map_or(f64::INFINITY, |nl| values[nl]);
                let hi = (c + 1 < base.counts()[axis])
                    .then(|| flat + stride)
                    .and_then(|nb| g.local_index(nb))
                    .map_or(f64::INFINITY, |nl| values[nl]);
                *slot = lo.min(hi);
            }
            let u = subset_min_root(&a, rhs[l]);
            if u != values[l] {
                let delta = if values[l].is_infinite() { f64::INFINITY } else { (u - values[l]).abs() };
                change = change.max(delta);
                values[l] = u;
            }
        }
        if change <= BRUTE_FORCE_TOL {
            quiet += 1;
            if quiet >= orientations {
                return Ok(values);
            }
        } else {
            quiet = 0;
        }
    }
    Err(Error::NonConvergence(BRUTE_FORCE_MAX_SWEEPS))
}
