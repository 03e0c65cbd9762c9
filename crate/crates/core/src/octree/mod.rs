//! Octree downsampling of lifted points.
//!
//! Points are bucketed into the cells of a single uniform octree level. The
//! level is data driven: the finest level (bounded by `max_depth` and
//! `leaf_edge_min`) whose occupied-cell count fits `target_voxels`. Each
//! occupied cell yields one [`VoxelRecord`] holding the arithmetic mean of
//! member positions, visual features and instance codes, the union of member
//! timestamps and the member count. Voxels are ordered by Morton code.
//!
//! Member sums are accumulated in a canonical member order, so the output is
//! bit-identical under any permutation of the input.

pub mod morton;
mod storage;

pub use storage::VoxelSet;

use std::cmp::Ordering;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{Aabb, Vec3};
use crate::lifting::PointCloud;
use crate::par;

/// Default condensed token budget.
pub const DEFAULT_BUDGET: usize = 1024;
/// Default leaf-voxel target.
pub const DEFAULT_TARGET_VOXELS: usize = 250_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OctreeConfig {
    pub max_depth: u8,
    pub leaf_edge_min: f64,
    pub target_voxels: usize,
    /// Fixed bounds; when absent a cube around the data is used.
    pub bounds: Option<Aabb>,
}

impl Default for OctreeConfig {
    fn default() -> Self {
        OctreeConfig {
            max_depth: morton::MAX_LEVEL,
            leaf_edge_min: 1e-3,
            target_voxels: DEFAULT_TARGET_VOXELS,
            bounds: None,
        }
    }
}

impl OctreeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=morton::MAX_LEVEL).contains(&self.max_depth) {
            return Err(Error::Config(format!("max_depth {} not in [1, 21]", self.max_depth)));
        }
        if self.target_voxels == 0 {
            return Err(Error::Config("target_voxels must be >= 1".into()));
        }
        if !(self.leaf_edge_min >= 0.0) {
            return Err(Error::Config("leaf_edge_min must be >= 0".into()));
        }
        Ok(())
    }
}

/// Aggregated cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VoxelRecord {
    pub pos: Vec3,
    pub vis: Vec<f64>,
    pub ins: Vec<f64>,
    /// Sorted, distinct.
    pub times: Vec<f32>,
    pub count: u64,
    /// Morton code of the cell at the grid level.
    pub key: u64,
}

/// Voxels of one uniform octree level.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    pub voxels: VoxelSet,
    pub level: u8,
    pub bounds: Aabb,
}

/// Output of [`condense`]: the same grid structure at a coarser level.
pub type CondensedTokens = VoxelGrid;

impl VoxelGrid {
    pub fn len(&self) -> usize {
        self.voxels.voxels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voxels.voxels.is_empty()
    }

    pub fn records(&self) -> &[VoxelRecord] {
        &self.voxels.voxels
    }

    pub fn total_count(&self) -> u64 {
        self.records().iter().map(|v| v.count).sum()
    }
}

/// Integer cell coordinates of `p` at `level` within `bounds`.
pub fn cell_coords(p: Vec3, bounds: &Aabb, level: u8) -> [u32; 3] {
    let cells = (1u64 << level) as f64;
    let max = (1u64 << level) - 1;
    let ext = bounds.extent();
    std::array::from_fn(|a| {
        let x = if ext[a] > 0.0 { (p[a] - bounds.min[a]) / ext[a] } else { 0.0 };
        let c = (x * cells).floor();
        (c.max(0.0) as u64).min(max) as u32
    })
}

fn pos64(p: [f32; 3]) -> Vec3 {
    p.map(|v| v as f64)
}

/// Cube enclosing all points, anchored at the per-axis minimum.
fn auto_bounds(points: &PointCloud) -> Aabb {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in &points.pos {
        for a in 0..3 {
            lo[a] = lo[a].min(p[a] as f64);
            hi[a] = hi[a].max(p[a] as f64);
        }
    }
    let side = (0..3).map(|a| hi[a] - lo[a]).fold(0.0, f64::max);
    let side = if side > 0.0 { side } else { 1.0 };
    Aabb::new(lo, [lo[0] + side, lo[1] + side, lo[2] + side])
}

/// Deepest level allowed by `max_depth` and `leaf_edge_min`.
fn deepest_level(cfg: &OctreeConfig, bounds: &Aabb) -> u8 {
    let edge = bounds.extent().into_iter().fold(f64::INFINITY, f64::min);
    let mut level = cfg.max_depth;
    if cfg.leaf_edge_min > 0.0 {
        while level > 0 && edge / ((1u64 << level) as f64) < cfg.leaf_edge_min {
            level -= 1;
        }
    }
    level
}

/// `counts[l]` = number of distinct cells at level `l` for sorted leaf codes.
fn occupancy_by_level(sorted_codes: &[u64], level: u8) -> Vec<usize> {
    let mut first_split = vec![0usize; level as usize + 1];
    for w in sorted_codes.windows(2) {
        if let Some(l) = morton::split_level(w[0], w[1], level) {
            first_split[l as usize] += 1;
        }
    }
    let base = usize::from(!sorted_codes.is_empty());
    let mut acc = base;
    first_split
        .into_iter()
        .map(|d| {
            acc += d;
            acc
        })
        .collect()
}

fn cmp_f32s(a: &[f32], b: &[f32]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Canonical total order on point records (code first).
fn cmp_points(points: &PointCloud, codes: &[u64], i: usize, j: usize) -> Ordering {
    let (a, b) = (points.get(i), points.get(j));
    codes[i]
        .cmp(&codes[j])
        .then_with(|| cmp_f32s(&a.pos, &b.pos))
        .then_with(|| a.t.total_cmp(&b.t))
        .then_with(|| a.instance_id.cmp(&b.instance_id))
        .then_with(|| cmp_f32s(a.vis, b.vis))
        .then_with(|| cmp_f32s(a.ins, b.ins))
}

fn aggregate_points(points: &PointCloud, members: &[usize], key: u64) -> VoxelRecord {
    let (dv, di) = (points.d_vis, points.d_ins);
    let mut pos = [0.0f64; 3];
    let mut vis = vec![0.0f64; dv];
    let mut ins = vec![0.0f64; di];
    let mut times: Vec<f32> = Vec::with_capacity(members.len());
    for &m in members {
        let p = points.get(m);
        for a in 0..3 {
            pos[a] += p.pos[a] as f64;
        }
        vis.iter_mut().zip(p.vis).for_each(|(s, &v)| *s += v as f64);
        ins.iter_mut().zip(p.ins).for_each(|(s, &v)| *s += v as f64);
        times.push(p.t);
    }
    let n = members.len() as f64;
    times.sort_by(f32::total_cmp);
    times.dedup_by(|a, b| a.to_bits() == b.to_bits());
    VoxelRecord {
        pos: pos.map(|s| s / n),
        vis: vis.into_iter().map(|s| s / n).collect(),
        ins: ins.into_iter().map(|s| s / n).collect(),
        times,
        count: members.len() as u64,
        key,
    }
}

/// Runs of equal values in `keys`, as index ranges.
fn runs(keys: &[u64]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=keys.len() {
        if i == keys.len() || keys[i] != keys[start] {
            if i > start {
                out.push((start, i));
            }
            start = i;
        }
    }
    out
}

/// Buckets points into the finest admissible uniform level and aggregates.
pub fn build_and_aggregate(points: &PointCloud, cfg: &OctreeConfig) -> Result<VoxelGrid> {
    cfg.validate()?;
    if points.is_empty() {
        return Err(Error::Empty("no points to aggregate".into()));
    }
    if points.pos.iter().any(|p| p.iter().any(|v| !v.is_finite())) {
        return Err(Error::Degenerate("non-finite point position".into()));
    }
    let bounds = match cfg.bounds {
        Some(b) => {
            if let Some(p) = points.pos.iter().find(|p| !b.contains(pos64(**p))) {
                return Err(Error::Config(format!("point {p:?} outside octree bounds")));
            }
            b
        }
        None => auto_bounds(points),
    };
    let deepest = deepest_level(cfg, &bounds);
    let codes: Vec<u64> = par::map(&points.pos, |p| morton::encode(cell_coords(pos64(*p), &bounds, deepest)));

    let mut order: Vec<usize> = (0..points.len()).collect();
    par::sort_by(&mut order, |&i, &j| cmp_points(points, &codes, i, j));
    let sorted: Vec<u64> = order.iter().map(|&i| codes[i]).collect();

    let occupancy = occupancy_by_level(&sorted, deepest);
    let level = (0..=deepest)
        .rev()
        .find(|&l| occupancy[l as usize] <= cfg.target_voxels)
        .unwrap_or(0);
    let up = deepest - level;
    let cell_keys: Vec<u64> = sorted.iter().map(|&c| morton::parent(c, up)).collect();
    let groups = runs(&cell_keys);
    let voxels = par::map(&groups, |&(s, e)| aggregate_points(points, &order[s..e], cell_keys[s]));
    log::debug!(
        "octree: {} points -> {} voxels at level {level} (deepest {deepest})",
        points.len(),
        voxels.len()
    );
    Ok(VoxelGrid {
        voxels: VoxelSet {
            d_vis: points.d_vis,
            d_ins: points.d_ins,
            voxels,
        },
        level,
        bounds,
    })
}

fn merge_voxels(members: &[VoxelRecord], key: u64) -> VoxelRecord {
    let first = &members[0];
    let mut pos = [0.0f64; 3];
    let mut vis = vec![0.0f64; first.vis.len()];
    let mut ins = vec![0.0f64; first.ins.len()];
    let mut times: Vec<f32> = Vec::new();
    let mut total = 0u64;
    for v in members {
        let w = v.count as f64;
        for a in 0..3 {
            pos[a] += w * v.pos[a];
        }
        vis.iter_mut().zip(&v.vis).for_each(|(s, x)| *s += w * x);
        ins.iter_mut().zip(&v.ins).for_each(|(s, x)| *s += w * x);
        times.extend_from_slice(&v.times);
        total += v.count;
    }
    let n = total as f64;
    times.sort_by(f32::total_cmp);
    times.dedup_by(|a, b| a.to_bits() == b.to_bits());
    VoxelRecord {
        pos: pos.map(|s| s / n),
        vis: vis.into_iter().map(|s| s / n).collect(),
        ins: ins.into_iter().map(|s| s / n).collect(),
        times,
        count: total,
        key,
    }
}

/// Re-aggregates a grid at a coarser `level` with count-weighted means.
pub fn coarsen(grid: &VoxelGrid, level: u8) -> Result<VoxelGrid> {
    if level > grid.level {
        return Err(Error::Config(format!("cannot coarsen level {} to {level}", grid.level)));
    }
    let up = grid.level - level;
    let recs = grid.records();
    let keys: Vec<u64> = recs.iter().map(|v| morton::parent(v.key, up)).collect();
    let groups = runs(&keys);
    let voxels = par::map(&groups, |&(s, e)| merge_voxels(&recs[s..e], keys[s]));
    Ok(VoxelGrid {
        voxels: VoxelSet {
            d_vis: grid.voxels.d_vis,
            d_ins: grid.voxels.d_ins,
            voxels,
        },
        level,
        bounds: grid.bounds,
    })
}

/// Coarsens level by level until at most `budget` voxels remain.
pub fn condense(grid: &VoxelGrid, budget: usize) -> Result<CondensedTokens> {
    if budget == 0 {
        return Err(Error::Config("budget must be >= 1".into()));
    }
    if grid.len() <= budget {
        return Ok(grid.clone());
    }
    let keys: Vec<u64> = grid.records().iter().map(|v| v.key).collect();
    let occupancy = occupancy_by_level(&keys, grid.level);
    let level = (0..=grid.level)
        .rev()
        .find(|&l| occupancy[l as usize] <= budget)
        .unwrap_or(0);
    coarsen(grid, level)
}

/// Condenses voxels that no longer carry their grid, such as a loaded file or
/// fused features. Cells are rebuilt at the finest level around the voxel
/// positions; since every mean lies inside its own cell this regroups the
/// same way the original tree would.
pub fn condense_set(set: &VoxelSet, budget: usize) -> Result<CondensedTokens> {
    if set.is_empty() {
        return Err(Error::Empty("no voxels to condense".into()));
    }
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for v in &set.voxels {
        for a in 0..3 {
            lo[a] = lo[a].min(v.pos[a]);
            hi[a] = hi[a].max(v.pos[a]);
        }
    }
    let side = (0..3).map(|a| hi[a] - lo[a]).fold(0.0, f64::max);
    let side = if side > 0.0 { side } else { 1.0 };
    let bounds = Aabb::new(lo, [lo[0] + side, lo[1] + side, lo[2] + side]);
    let level = morton::MAX_LEVEL;
    let mut voxels: Vec<VoxelRecord> = set
        .voxels
        .iter()
        .map(|v| VoxelRecord {
            key: morton::encode(cell_coords(v.pos, &bounds, level)),
            ..v.clone()
        })
        .collect();
    par::sort_by(&mut voxels, cmp_voxels);
    let grid = VoxelGrid {
        voxels: VoxelSet {
            d_vis: set.d_vis,
            d_ins: set.d_ins,
            voxels,
        },
        level,
        bounds,
    };
    condense(&grid, budget)
}

fn cmp_f64s(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

fn cmp_voxels(a: &VoxelRecord, b: &VoxelRecord) -> Ordering {
    a.key
        .cmp(&b.key)
        .then_with(|| cmp_f64s(&a.pos, &b.pos))
        .then_with(|| a.count.cmp(&b.count))
        .then_with(|| cmp_f32s(&a.times, &b.times))
        .then_with(|| cmp_f64s(&a.vis, &b.vis))
        .then_with(|| cmp_f64s(&a.ins, &b.ins))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VoxelStats {
    pub count: usize,
    pub depth: u8,
    pub points: u64,
    /// `(max members, voxels)` buckets: 1, 2-3, 4-7, ...
    pub occupancy_histogram: Vec<(u64, usize)>,
    pub memory_bytes: usize,
    pub compression_ratio: f64,
}

pub fn voxel_stats(grid: &VoxelGrid) -> VoxelStats {
    let mut hist: Vec<(u64, usize)> = Vec::new();
    for v in grid.records() {
        let b = 63 - v.count.max(1).leading_zeros() as usize;
        if hist.len() <= b {
            hist.resize_with(b + 1, || (0, 0));
        }
        hist[b].1 += 1;
    }
    for (b, h) in hist.iter_mut().enumerate() {
        h.0 = (1u64 << (b + 1)) - 1;
    }
    let points = grid.total_count();
    VoxelStats {
        count: grid.len(),
        depth: grid.level,
        points,
        occupancy_histogram: hist,
        memory_bytes: grid.voxels.encoded_len(),
        compression_ratio: if grid.is_empty() { 0.0 } else { points as f64 / grid.len() as f64 },
    }
}
