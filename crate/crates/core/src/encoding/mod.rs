//! Forward passes that turn condensed voxels and camera poses into tokens.
//!
//! * [`time_basis`] / [`time_embed`]: sinusoidal timestamp features pooled
//!   over a voxel's timestamp set.
//! * [`pos_encode`]: the same ladder per axis with a meter-scale base.
//! * [`fuse`]: self-attention across voxel tokens added onto visual features.
//! * [`camera_embed`]: learned queries cross-attending over the pose track.

mod attention;
mod tokens;
mod weights;

pub use attention::{attend, attention_core, AttentionOutput, Rows};
pub use tokens::SceneTokens;
pub use weights::{CameraWeights, FusionWeights, Mat, ModelWeights, WeightDims, DEFAULT_M, POSE_DIM};

use crate::error::{Error, Result};
use crate::geometry::{CameraPose, Vec3};
use crate::octree::{self, VoxelRecord, VoxelSet};

pub const DEFAULT_ALPHA: f64 = 0.5;
/// Above this many voxels, condensation runs before fusion.
pub const DEFAULT_FUSE_CAP: usize = 4096;

const TIME_BASE: f64 = 1e4;
const POS_BASE: f64 = 1e2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeEncodingConfig {
    pub d_vis: usize,
    pub alpha: f64,
}

impl TimeEncodingConfig {
    pub fn new(d_vis: usize, alpha: f64) -> Result<Self> {
        let cfg = TimeEncodingConfig { d_vis, alpha };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_vis % 2 != 0 {
            return Err(Error::Config(format!("d_vis must be even, got {}", self.d_vis)));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("alpha must lie in [0, 1], got {}", self.alpha)));
        }
        Ok(())
    }
}

fn ladder(x: f64, base: f64, d: usize, out: &mut [f64]) {
    let step = base.ln() / d as f64;
    for m in 0..out.len() / 2 {
        let f = (-step * m as f64).exp();
        out[2 * m] = (x * f).sin();
        out[2 * m + 1] = (x * f).cos();
    }
}

/// Interleaved sin/cos of `t` at frequencies `exp(-ln(1e4)/d · m)`.
pub fn time_basis(t: f64, d_vis: usize) -> Result<Vec<f64>> {
    if d_vis % 2 != 0 {
        return Err(Error::Config(format!("d_vis must be even, got {d_vis}")));
    }
    let mut out = vec![0.0; d_vis];
    ladder(t, TIME_BASE, d_vis, &mut out);
    Ok(out)
}

/// `alpha · max + (1 - alpha) · mean` of the per-timestamp bases.
pub fn time_embed(times: &[f32], cfg: &TimeEncodingConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    if times.is_empty() {
        return Err(Error::Empty("time_embed needs at least one timestamp".into()));
    }
    let d = cfg.d_vis;
    let mut max = vec![f64::NEG_INFINITY; d];
    let mut sum = vec![0.0; d];
    for &t in times {
        let b = time_basis(t as f64, d)?;
        for c in 0..d {
            max[c] = max[c].max(b[c]);
            sum[c] += b[c];
        }
    }
    let n = times.len() as f64;
    Ok((0..d)
        .map(|c| cfg.alpha * max[c] + (1.0 - cfg.alpha) * (sum[c] / n))
        .collect())
}

/// Per-axis ladders with base 1e2; each axis gets `2·floor(d/6)` channels,
/// any remainder is zero.
pub fn pos_encode(pos: Vec3, d_vis: usize) -> Vec<f64> {
    let per_axis = 2 * (d_vis / 6);
    let mut out = vec![0.0; d_vis];
    for (a, p) in pos.iter().enumerate() {
        ladder(*p, POS_BASE, per_axis.max(1), &mut out[a * per_axis..(a + 1) * per_axis]);
    }
    out
}

fn check_voxels(voxels: &[VoxelRecord], w: &FusionWeights) -> Result<()> {
    let (d, d_ins) = (w.w_ins.rows, w.w_ins.cols);
    for (i, v) in voxels.iter().enumerate() {
        if v.vis.len() != d || v.ins.len() != d_ins {
            return Err(Error::Shape(format!(
                "voxel {i} has vis/ins widths {}/{}, weights expect {d}/{d_ins}",
                v.vis.len(),
                v.ins.len()
            )));
        }
    }
    Ok(())
}

/// The 3·d input of voxel `v`: instance projection, time embedding, position.
pub fn fusion_input(v: &VoxelRecord, w: &FusionWeights, cfg: &TimeEncodingConfig) -> Result<Vec<f64>> {
    let mut x = w.w_ins.apply(&v.ins);
    x.extend(time_embed(&v.times, cfg)?);
    x.extend(pos_encode(v.pos, cfg.d_vis));
    Ok(x)
}

/// Fused features `vis + O · SA(W_in · x)` for every voxel, in input order.
pub fn fuse(voxels: &[VoxelRecord], w: &FusionWeights, alpha: f64) -> Result<Vec<Vec<f64>>> {
    if voxels.is_empty() {
        return Err(Error::Empty("no voxels to fuse".into()));
    }
    check_voxels(voxels, w)?;
    let d = w.w_ins.rows;
    let cfg = TimeEncodingConfig::new(d, alpha)?;
    let h = crate::par::try_map(voxels, |v| Ok::<_, Error>(w.w_in.apply(&fusion_input(v, w, &cfg)?)))?;
    let q: Rows = crate::par::map(&h, |x| w.q.apply(x));
    let k: Rows = crate::par::map(&h, |x| w.k.apply(x));
    let val: Rows = crate::par::map(&h, |x| w.v.apply(x));
    let att = attend(&q, &k, &val, 1.0 / (d as f64).sqrt())?;
    Ok(voxels
        .iter()
        .zip(att)
        .map(|(v, a)| v.vis.iter().zip(w.o.apply(&a)).map(|(x, y)| x + y).collect())
        .collect())
}

/// `M` camera tokens from learned queries attending over projected poses.
pub fn camera_embed(poses: &[CameraPose], w: &CameraWeights) -> Result<Vec<Vec<f64>>> {
    if poses.is_empty() {
        return Err(Error::Empty("camera_embed needs at least one pose".into()));
    }
    let d = w.proj.rows;
    let f: Rows = poses
        .iter()
        .map(|p| w.proj.apply(&p.as_array()).iter().zip(&w.bias).map(|(a, b)| a + b).collect())
        .collect();
    let k: Rows = f.iter().map(|x| w.k.apply(x)).collect();
    let v: Rows = f.iter().map(|x| w.v.apply(x)).collect();
    let att = attend(&w.queries.to_rows(), &k, &v, 1.0 / (d as f64).sqrt())?;
    Ok(att.iter().map(|a| w.o.apply(a)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncodeConfig {
    pub alpha: f64,
    pub budget: usize,
    /// Largest voxel count fused before condensation.
    pub fuse_cap: usize,
}

impl Default for EncodeConfig {
    fn default() -> Self {
        EncodeConfig {
            alpha: DEFAULT_ALPHA,
            budget: octree::DEFAULT_BUDGET,
            fuse_cap: DEFAULT_FUSE_CAP,
        }
    }
}

/// Fuses and condenses `voxels` to at most `budget` scene tokens, then
/// appends camera tokens.
///
/// When the voxel count fits `fuse_cap`, fusion runs first and the fused
/// features are condensed; otherwise the set is condensed first and the
/// survivors fused.
pub fn encode_scene(
    voxels: &VoxelSet,
    poses: &[CameraPose],
    w: &ModelWeights,
    cfg: &EncodeConfig,
) -> Result<SceneTokens> {
    let fused = if voxels.len() <= cfg.fuse_cap {
        let f = fuse(&voxels.voxels, &w.fusion, cfg.alpha)?;
        let mut set = voxels.clone();
        for (v, x) in set.voxels.iter_mut().zip(f) {
            v.vis = x;
        }
        octree::condense_set(&set, cfg.budget)?.voxels
    } else {
        let mut set = octree::condense_set(voxels, cfg.budget)?.voxels;
        let f = fuse(&set.voxels, &w.fusion, cfg.alpha)?;
        for (v, x) in set.voxels.iter_mut().zip(f) {
            v.vis = x;
        }
        set
    };
    log::debug!("encode: {} voxels -> {} scene tokens", voxels.len(), fused.len());
    Ok(SceneTokens {
        d_vis: w.fusion.w_ins.rows,
        scene: fused.voxels.into_iter().map(|v| v.vis).collect(),
        camera: camera_embed(poses, &w.camera)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn voxel(rng: &mut ChaCha8Rng, d: usize, d_ins: usize) -> VoxelRecord {
        let mut times: Vec<f32> = (0..rng.random_range(1..4)).map(|_| rng.random_range(0..50) as f32 * 0.2).collect();
        times.sort_by(f32::total_cmp);
        times.dedup();
        VoxelRecord {
            pos: [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(0.0..2.0)],
            vis: (0..d).map(|_| rng.random_range(-1.0..1.0)).collect(),
            ins: (0..d_ins).map(|_| rng.random_range(-1.0..1.0)).collect(),
            times,
            count: 1,
            key: 0,
        }
    }

    #[test]
    fn time_basis_examples() {
        let z = time_basis(0.0, 6).unwrap();
        assert_eq!(z, vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
        let b = time_basis(1.0, 4).unwrap();
        let want = [1f64.sin(), 1f64.cos(), 0.1f64.sin(), 0.1f64.cos()];
        for (a, w) in b.iter().zip(want) {
            assert!((a - w).abs() < 1e-12);
        }
        assert!((b[0] - 0.84147).abs() < 1e-5 && (b[3] - 0.99500).abs() < 1e-5);
        assert!(time_basis(0.0, 5).is_err());
    }

    #[test]
    fn slowest_band_near_hundredth() {
        let d = 512;
        let f = (-(1e4f64.ln() / d as f64) * (d / 2 - 1) as f64).exp();
        assert!((f / 1e-2 - 1.0).abs() < 0.05);
    }

    #[test]
    fn time_embed_examples() {
        let cfg = TimeEncodingConfig::new(4, 0.5).unwrap();
        assert_eq!(time_embed(&[2.5], &cfg).unwrap(), time_basis(2.5, 4).unwrap());
        let (a, b) = (time_basis(0.0, 4).unwrap(), time_basis(1.0, 4).unwrap());
        let e = time_embed(&[0.0, 1.0], &cfg).unwrap();
        for c in 0..4 {
            let want = 0.5 * a[c].max(b[c]) + 0.5 * (a[c] + b[c]) / 2.0;
            assert!((e[c] - want).abs() < 1e-15);
        }
        let max = time_embed(&[0.0, 1.0], &TimeEncodingConfig::new(4, 1.0).unwrap()).unwrap();
        let mean = time_embed(&[0.0, 1.0], &TimeEncodingConfig::new(4, 0.0).unwrap()).unwrap();
        for c in 0..4 {
            assert_eq!(max[c], a[c].max(b[c]));
            assert!((mean[c] - (a[c] + b[c]) / 2.0).abs() < 1e-15);
        }
        assert!(time_embed(&[], &cfg).is_err());
        assert!(TimeEncodingConfig::new(4, 1.5).is_err());
    }

    #[test]
    fn pos_encode_examples() {
        let o = pos_encode([0.0; 3], 64);
        // 10 sin/cos pairs per axis, 4 zero-padded channels
        for a in 0..3 {
            for m in 0..10 {
                assert_eq!(o[a * 20 + 2 * m], 0.0);
                assert_eq!(o[a * 20 + 2 * m + 1], 1.0);
            }
        }
        assert!(o[60..].iter().all(|&v| v == 0.0));
        let p = pos_encode([0.3, -1.0, 2.0], 64);
        let q = pos_encode([0.3 + 1e-6, -1.0, 2.0], 64);
        assert!(p.iter().zip(&q).all(|(a, b)| (a - b).abs() < 1e-5));
        let r = pos_encode([1.3, -1.0, 2.0], 64);
        assert_eq!((p[0] - r[0]).abs(), (0.3f64.sin() - 1.3f64.sin()).abs());
    }

    #[test]
    fn injective_over_ten_thousand_seconds() {
        let bases: Vec<Vec<f64>> = (0..10_000).map(|t| time_basis(t as f64, 64).unwrap()).collect();
        // nearest pairs live at small lags or near-commensurate lags; scan all
        let min_gap = crate::par::map_range(bases.len(), |i| {
            let mut m = f64::INFINITY;
            for j in i + 1..bases.len() {
                let d2: f64 = bases[i].iter().zip(&bases[j]).map(|(a, b)| (a - b) * (a - b)).sum();
                m = m.min(d2);
            }
            m
        })
        .into_iter()
        .fold(f64::INFINITY, f64::min)
        .sqrt();
        assert!(min_gap > 1e-4, "min gap {min_gap}");
    }

    #[test]
    fn single_voxel_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let w = ModelWeights::init(5, WeightDims::new(8, 8, 2).unwrap()).unwrap();
        let v = voxel(&mut rng, 8, 8);
        let out = fuse(std::slice::from_ref(&v), &w.fusion, 0.5).unwrap();
        let cfg = TimeEncodingConfig::new(8, 0.5).unwrap();
        let h = w.fusion.w_in.apply(&fusion_input(&v, &w.fusion, &cfg).unwrap());
        let want: Vec<f64> = v.vis.iter().zip(w.fusion.o.apply(&w.fusion.v.apply(&h))).map(|(a, b)| a + b).collect();
        assert_eq!(out[0], want);
    }

    #[test]
    fn zero_weights_pass_through() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut w = ModelWeights::init(5, WeightDims::new(8, 8, 2).unwrap()).unwrap();
        w.fusion.o = Mat::zeros(8, 8);
        let vs: Vec<VoxelRecord> = (0..5).map(|_| voxel(&mut rng, 8, 8)).collect();
        let out = fuse(&vs, &w.fusion, 0.5).unwrap();
        for (o, v) in out.iter().zip(&vs) {
            assert_eq!(o, &v.vis);
        }
        let z = ModelWeights::zeros(WeightDims::new(8, 8, 2).unwrap()).unwrap();
        assert_eq!(fuse(&vs, &z.fusion, 0.5).unwrap()[2], vs[2].vis);
    }

    #[test]
    fn fuse_shape_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let w = ModelWeights::init(5, WeightDims::new(8, 8, 2).unwrap()).unwrap();
        assert!(matches!(fuse(&[voxel(&mut rng, 6, 8)], &w.fusion, 0.5), Err(Error::Shape(_))));
        assert!(matches!(fuse(&[], &w.fusion, 0.5), Err(Error::Empty(_))));
    }

    #[test]
    fn camera_single_pose_closed_form() {
        let w = ModelWeights::init(9, WeightDims::new(8, 8, 3).unwrap()).unwrap();
        let pose = CameraPose::look(0.0, [1.0, 2.0, 1.5], 0.3, -0.2);
        let out = camera_embed(&[pose], &w.camera).unwrap();
        let f: Vec<f64> = w.camera.proj.apply(&pose.as_array()).iter().zip(&w.camera.bias).map(|(a, b)| a + b).collect();
        let want = w.camera.o.apply(&w.camera.v.apply(&f));
        assert_eq!(out.len(), 3);
        for row in &out {
            assert_eq!(row, &want);
        }
    }

    #[test]
    fn camera_duplication_invariance() {
        let w = ModelWeights::init(9, WeightDims::new(16, 8, 8).unwrap()).unwrap();
        let poses: Vec<CameraPose> = (0..10).map(|i| CameraPose::look(i as f64, [i as f64 * 0.1, 0.0, 1.6], i as f64 * 0.2, -0.3)).collect();
        let a = camera_embed(&poses, &w.camera).unwrap();
        let doubled: Vec<CameraPose> = poses.iter().chain(&poses).copied().collect();
        let b = camera_embed(&doubled, &w.camera).unwrap();
        for (x, y) in a.iter().flatten().zip(b.iter().flatten()) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!(camera_embed(&[], &w.camera).is_err());
    }

    #[test]
    fn encode_scene_orders_agree_in_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let w = ModelWeights::init(1, WeightDims::new(8, 8, 8).unwrap()).unwrap();
        let set = VoxelSet { d_vis: 8, d_ins: 8, voxels: (0..40).map(|_| voxel(&mut rng, 8, 8)).collect() };
        let poses = vec![CameraPose::identity(0.0)];
        let a = encode_scene(&set, &poses, &w, &EncodeConfig { budget: 10, ..Default::default() }).unwrap();
        let b = encode_scene(&set, &poses, &w, &EncodeConfig { budget: 10, fuse_cap: 5, ..Default::default() }).unwrap();
        assert!(a.scene.len() <= 10);
        assert_eq!(a.scene.len(), b.scene.len());
        assert_eq!(a.camera.len(), 8);
        let c = encode_scene(&set, &poses, &w, &EncodeConfig::default()).unwrap();
        assert_eq!(c.scene.len(), 40);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn basis_bounded(t in -1e4f64..1e4, half in 1usize..40) {
            prop_assert!(time_basis(t, 2 * half).unwrap().iter().all(|v| (-1.0..=1.0).contains(v)));
        }

        #[test]
        fn embed_in_envelope(ts in prop::collection::vec(0u16..500, 1..6), alpha in 0.0f64..=1.0) {
            let times: Vec<f32> = ts.iter().map(|&t| t as f32 * 0.2).collect();
            let cfg = TimeEncodingConfig::new(16, alpha).unwrap();
            let e = time_embed(&times, &cfg).unwrap();
            let mx = time_embed(&times, &TimeEncodingConfig::new(16, 1.0).unwrap()).unwrap();
            let mn = time_embed(&times, &TimeEncodingConfig::new(16, 0.0).unwrap()).unwrap();
            for c in 0..16 {
                let (lo, hi) = (mx[c].min(mn[c]), mx[c].max(mn[c]));
                prop_assert!(e[c] >= lo - 1e-12 && e[c] <= hi + 1e-12);
            }
        }

        #[test]
        fn fuse_permutation_equivariant(seed in 0u64..1000, n in 2usize..12) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let w = ModelWeights::init(seed, WeightDims::new(8, 4, 2).unwrap()).unwrap();
            let vs: Vec<VoxelRecord> = (0..n).map(|_| voxel(&mut rng, 8, 4)).collect();
            let base = fuse(&vs, &w.fusion, 0.5).unwrap();
            let mut perm: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                perm.swap(i, rng.random_range(0..=i));
            }
            let pv: Vec<VoxelRecord> = perm.iter().map(|&i| vs[i].clone()).collect();
            let out = fuse(&pv, &w.fusion, 0.5).unwrap();
            for (k, &i) in perm.iter().enumerate() {
                prop_assert_eq!(&out[k], &base[i]);
            }
        }

        #[test]
        fn camera_permutation_invariant(seed in 0u64..1000, n in 1usize..20) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let w = ModelWeights::init(seed, WeightDims::new(8, 4, 8).unwrap()).unwrap();
            let poses: Vec<CameraPose> = (0..n)
                .map(|i| CameraPose::look(i as f64, [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), 1.6], rng.random_range(-3.0..3.0), -0.3))
                .collect();
            let mut rev = poses.clone();
            rev.reverse();
            let a = camera_embed(&poses, &w.camera).unwrap();
            let b = camera_embed(&rev, &w.camera).unwrap();
            for (x, y) in a.iter().flatten().zip(b.iter().flatten()) {
                prop_assert!((x - y).abs() < 1e-6);
            }
        }
    }
}
