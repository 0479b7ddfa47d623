//! Regular lattices over axis-aligned boxes and restricted node subsets.
//!
//! Nodes are addressed either by a multi-index (one coordinate per axis) or
//! by a flat row-major index where the last axis varies fastest.

use crate::error::{Error, Result};

/// Relative slack used when converting coordinates to lattice positions.
const SNAP_TOL: f64 = 1e-9;

/// Closed axis-aligned box `[lo, hi]` in `R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxDomain {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() {
            return Err(Error::InvalidDomain("dimension must be at least 1".into()));
        }
        if lo.len() != hi.len() {
            return Err(Error::InvalidDomain(format!("lo has {} coordinates, hi has {}", lo.len(), hi.len())));
        }
        for (axis, (a, b)) in lo.iter().zip(&hi).enumerate() {
            if !(a.is_finite() && b.is_finite() && a < b) {
                return Err(Error::InvalidDomain(format!("axis {axis}: need lo < hi, got [{a}, {b}]")));
            }
        }
        Ok(Self { lo, hi })
    }

    /// The unit cube `[0, 1]^d`.
    pub fn unit(dim: usize) -> Result<Self> {
        Self::new(vec![0.0; dim], vec![1.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    /// Length of the longest side.
    pub fn max_extent(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).fold(0.0, f64::max)
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim() && p.iter().zip(self.lo.iter().zip(&self.hi)).all(|(x, (a, b))| *a <= *x && *x <= *b)
    }

    /// Euclidean distance from `p` to the boundary of the box, for `p` inside.
    pub fn distance_to_boundary(&self, p: &[f64]) -> f64 {
        p.iter().zip(self.lo.iter().zip(&self.hi)).map(|(x, (a, b))| (x - a).min(b - x)).fold(f64::INFINITY, f64::min)
    }
}

/// Regular lattice with uniform step `h` covering a [`BoxDomain`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    domain: BoxDomain,
    h: f64,
    counts: Vec<usize>,
    strides: Vec<usize>,
    len: usize,
}

impl GridSpec {
    pub fn new(domain: BoxDomain, h: f64) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::InvalidArgument(format!("mesh step must be positive, got {h}")));
        }
        let counts: Vec<usize> =
            domain.lo.iter().zip(&domain.hi).map(|(a, b)| ((b - a) / h + SNAP_TOL).floor() as usize + 1).collect();
        let mut strides = vec![1usize; counts.len()];
        for axis in (0..counts.len().saturating_sub(1)).rev() {
            strides[axis] = strides[axis + 1]
                .checked_mul(counts[axis + 1])
                .ok_or_else(|| Error::InvalidArgument("grid too large".into()))?;
        }
        let len = strides[0].checked_mul(counts[0]).ok_or_else(|| Error::InvalidArgument("grid too large".into()))?;
        Ok(Self { domain, h, counts, strides, len })
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn mesh_step(&self) -> f64 {
        self.h
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    /// Total number of lattice nodes.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn flat_index(&self, idx: &[usize]) -> Result<usize> {
        if idx.len() != self.dim() || idx.iter().zip(&self.counts).any(|(i, n)| i >= n) {
            return Err(Error::IndexOutOfRange { index: idx.to_vec(), counts: self.counts.clone() });
        }
        Ok(idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum())
    }

    pub fn multi_index(&self, flat: usize) -> Result<Vec<usize>> {
        if flat >= self.len {
            return Err(Error::FlatIndexOutOfRange(flat));
        }
        let mut out = vec![0; self.dim()];
        self.decompose(flat, &mut out);
        Ok(out)
    }

    /// Writes the multi-index of a known-valid flat index into `out`.
    pub(crate) fn decompose(&self, mut flat: usize, out: &mut [usize]) {
        for (o, s) in out.iter_mut().zip(&self.strides) {
            *o = flat / s;
            flat %= s;
        }
    }

    pub fn node_to_point(&self, idx: &[usize]) -> Result<Vec<f64>> {
        self.flat_index(idx)?;
        Ok(idx.iter().zip(&self.domain.lo).map(|(&i, lo)| lo + i as f64 * self.h).collect())
    }

    pub fn flat_to_point(&self, flat: usize) -> Result<Vec<f64>> {
        let idx = self.multi_index(flat)?;
        self.node_to_point(&idx)
    }

    /// Point of a known-valid flat index written into `out`.
    pub(crate) fn point_into(&self, flat: usize, coords: &mut [usize], out: &mut [f64]) {
        self.decompose(flat, coords);
        for ((o, &i), lo) in out.iter_mut().zip(coords.iter()).zip(&self.domain.lo) {
            *o = lo + i as f64 * self.h;
        }
    }

    /// Nearest lattice node to `p`, clamped into the grid.
    pub fn point_to_nearest_node(&self, p: &[f64]) -> Vec<usize> {
        p.iter()
            .zip(&self.domain.lo)
            .zip(&self.counts)
            .map(|((x, lo), &n)| {
                let k = ((x - lo) / self.h).round();
                if k <= 0.0 {
                    0
                } else {
                    (k as usize).min(n - 1)
                }
            })
            .collect()
    }

    /// Per-axis inclusive index ranges of nodes lying in the closed box `[lo, hi]`.
    /// `None` when the box misses the lattice.
    pub fn index_box(&self, lo: &[f64], hi: &[f64]) -> Option<Vec<(usize, usize)>> {
        let mut ranges = Vec::with_capacity(self.dim());
        for axis in 0..self.dim() {
            let origin = self.domain.lo[axis];
            let first = ((lo[axis] - origin) / self.h - SNAP_TOL).ceil().max(0.0);
            let last = ((hi[axis] - origin) / self.h + SNAP_TOL).floor();
            if last < 0.0 || first > last {
                return None;
            }
            let last = (last as usize).min(self.counts[axis] - 1);
            let first = first as usize;
            if first > last {
                return None;
            }
            ranges.push((first, last));
        }
        Some(ranges)
    }

    /// Calls `f` with the flat index of every node in the index box, in
    /// increasing flat order.
    pub(crate) fn for_each_in_box(&self, ranges: &[(usize, usize)], mut f: impl FnMut(usize)) {
        let d = ranges.len();
        let mut cur: Vec<usize> = ranges.iter().map(|r| r.0).collect();
        loop {
            f(cur.iter().zip(&self.strides).map(|(i, s)| i * s).sum());
            let mut axis = d;
            loop {
                if axis == 0 {
                    return;
                }
                axis -= 1;
                if cur[axis] < ranges[axis].1 {
                    cur[axis] += 1;
                    break;
                }
                cur[axis] = ranges[axis].0;
            }
        }
    }

    /// Every node whose point lies in `region` (closed membership), sorted by flat index.
    pub fn nodes_in_region(&self, region: &Region) -> Vec<usize> {
        self.nodes_near_region(region, 0.0)
    }

    /// Every node within Euclidean distance `pad` of `region`, sorted by flat index.
    /// `pad = 0` is plain closed membership.
    pub fn nodes_near_region(&self, region: &Region, pad: f64) -> Vec<usize> {
        let mut out = Vec::new();
        let mut coords = vec![0; self.dim()];
        let mut point = vec![0.0; self.dim()];
        region.for_each_part(&mut |part| {
            let (lo, hi) = part.bounding_box();
            let lo: Vec<f64> = lo.iter().map(|v| v - pad).collect();
            let hi: Vec<f64> = hi.iter().map(|v| v + pad).collect();
            if let Some(ranges) = self.index_box(&lo, &hi) {
                self.for_each_in_box(&ranges, |flat| {
                    self.point_into(flat, &mut coords, &mut point);
                    if part.within(&point, pad) {
                        out.push(flat);
                    }
                });
            }
        });
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// Closed geometric set used for source and destination targets.
#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    Ball { center: Vec<f64>, radius: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Union(Vec<Region>),
}

impl Region {
    pub fn ball(center: Vec<f64>, radius: f64) -> Self {
        Region::Ball { center, radius }
    }

    pub fn cuboid(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        Region::Box { lo, hi }
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        match self {
            Region::Ball { center, radius } => euclid(p, center) <= *radius,
            Region::Box { lo, hi } => p.iter().zip(lo.iter().zip(hi)).all(|(x, (a, b))| *a <= *x && *x <= *b),
            Region::Union(parts) => parts.iter().any(|r| r.contains(p)),
        }
    }

    /// Euclidean distance from `p` to the set; zero inside.
    pub fn distance(&self, p: &[f64]) -> f64 {
        match self {
            Region::Ball { center, radius } => (euclid(p, center) - radius).max(0.0),
            Region::Box { lo, hi } => p
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(x, (a, b))| {
                    let gap = (a - x).max(x - b).max(0.0);
                    gap * gap
                })
                .sum::<f64>()
                .sqrt(),
            Region::Union(parts) => parts.iter().map(|r| r.distance(p)).fold(f64::INFINITY, f64::min),
        }
    }

    /// Membership in the closed `pad`-neighbourhood `self + B(0, pad)`.
    pub fn within(&self, p: &[f64], pad: f64) -> bool {
        if pad <= 0.0 {
            self.contains(p)
        } else {
            self.distance(p) <= pad
        }
    }

    /// Axis-aligned bounding box of a non-union region.
    fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Region::Ball { center, radius } => {
                (center.iter().map(|c| c - radius).collect(), center.iter().map(|c| c + radius).collect())
            }
            Region::Box { lo, hi } => (lo.clone(), hi.clone()),
            Region::Union(_) => unreachable!("unions are flattened by for_each_part"),
        }
    }

    fn for_each_part<'a>(&'a self, f: &mut dyn FnMut(&'a Region)) {
        match self {
            Region::Union(parts) => parts.iter().for_each(|r| r.for_each_part(f)),
            other => f(other),
        }
    }

    /// Coordinate dimension of the first part that carries one.
    pub fn dim(&self) -> Option<usize> {
        match self {
            Region::Ball { center, .. } => Some(center.len()),
            Region::Box { lo, .. } => Some(lo.len()),
            Region::Union(parts) => parts.iter().find_map(Region::dim),
        }
    }
}

/// Euclidean distance between two points.
pub fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Maximum-norm distance between two points.
pub fn linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// The `±1` neighbours of a node along one axis; `None` marks an absent side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AxisNeighbors {
    pub axis: usize,
    pub minus: Option<usize>,
    pub plus: Option<usize>,
}

/// A [`GridSpec`] together with the subset of its nodes that take part in a solve.
///
/// Members of a proper subset are kept as a sorted vector of flat indices; a
/// node's position in that vector is its local index, used to address
/// per-node storage.
#[derive(Debug, Clone, PartialEq)]
pub struct RestrictedGrid {
    base: GridSpec,
    members: Option<Vec<usize>>,
}

impl RestrictedGrid {
    /// Every node of `base` is a member.
    pub fn full(base: GridSpec) -> Self {
        Self { base, members: None }
    }

    pub fn from_members(base: GridSpec, mut members: Vec<usize>) -> Result<Self> {
        members.sort_unstable();
        members.dedup();
        if let Some(&last) = members.last() {
            if last >= base.len() {
                return Err(Error::FlatIndexOutOfRange(last));
            }
        }
        Ok(Self { base, members: Some(members) })
    }

    pub fn base(&self) -> &GridSpec {
        &self.base
    }

    pub fn is_full(&self) -> bool {
        self.members.is_none()
    }

    pub fn len(&self) -> usize {
        self.members.as_ref().map_or(self.base.len(), Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Position of `flat` in the member list.
    #[inline]
    pub fn local_index(&self, flat: usize) -> Option<usize> {
        match &self.members {
            None => (flat < self.base.len()).then_some(flat),
            Some(m) => m.binary_search(&flat).ok(),
        }
    }

    #[inline]
    pub fn member_at(&self, local: usize) -> usize {
        match &self.members {
            None => local,
            Some(m) => m[local],
        }
    }

    pub fn contains(&self, flat: usize) -> bool {
        self.local_index(flat).is_some()
    }

    /// Member flat indices in increasing order.
    pub fn members(&self) -> Box<dyn Iterator<Item = usize> + '_> {
        match &self.members {
            None => Box::new(0..self.base.len()),
            Some(m) => Box::new(m.iter().copied()),
        }
    }

    /// Flat index of the neighbour one step along `axis` (`forward` selects +1),
    /// provided it exists and is a member. `coords` is the multi-index of `flat`.
    #[inline]
    pub(crate) fn step(&self, flat: usize, coords: &[usize], axis: usize, forward: bool) -> Option<usize> {
        let stride = self.base.strides[axis];
        let nb = if forward {
            if coords[axis] + 1 >= self.base.counts[axis] {
                return None;
            }
            flat + stride
        } else {
            if coords[axis] == 0 {
                return None;
            }
            flat - stride
        };
        self.contains(nb).then_some(nb)
    }

    pub fn axis_neighbors(&self, flat: usize) -> Result<Vec<AxisNeighbors>> {
        if !self.contains(flat) {
            return Err(Error::NotAMember(flat));
        }
        let mut coords = vec![0; self.base.dim()];
        self.base.decompose(flat, &mut coords);
        Ok((0..self.base.dim())
            .map(|axis| AxisNeighbors {
                axis,
                minus: self.step(flat, &coords, axis, false),
                plus: self.step(flat, &coords, axis, true),
            })
            .collect())
    }

    /// Members lying in `region`, sorted.
    pub fn nodes_in_region(&self, region: &Region) -> Vec<usize> {
        self.nodes_near_region(region, 0.0)
    }

    /// Members within distance `pad` of `region`, sorted.
    pub fn nodes_near_region(&self, region: &Region, pad: f64) -> Vec<usize> {
        let mut nodes = self.base.nodes_near_region(region, pad);
        if self.members.is_some() {
            nodes.retain(|&n| self.contains(n));
        }
        nodes
    }
}
