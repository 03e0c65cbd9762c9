//! Lifting: RGB-D frames to timestamped world points carrying a blended
//! visual feature, an instance identity code and the frame time.

mod embed;
mod encoder;
mod points;

pub use embed::{instance_embedding_table, instance_seed, standard_normals, InstanceEmbeddingTable, DEFAULT_D_INS};
pub use encoder::{
    color_histogram, mock_encode, read_features, write_features, EncoderHandle, FeatureVec, FileEncoder,
    MockEncoder, RegionKey, RgbRegion,
};
pub use points::{PointCloud, PointRecord};

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::geometry::CameraPose;
use crate::par;
use crate::scene::{unproject, Frame, Intrinsics, SceneSequence};

/// Default visual feature width for the mock encoder.
pub const DEFAULT_D_VIS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LiftOptions {
    /// Clamp the blend similarity to [0, 1] instead of using the raw cosine.
    pub clamp_similarity: bool,
}

/// `sim * global + (1 - sim) * local` with `sim = cos(local, global)`.
pub fn blend_features(global: &FeatureVec, local: &FeatureVec, clamp: bool) -> Result<FeatureVec> {
    if global.dim() != local.dim() {
        return Err(Error::Shape(format!("feature dims {} and {}", global.dim(), local.dim())));
    }
    if global.0.iter().chain(&local.0).any(|v| !v.is_finite()) {
        return Err(Error::Degenerate("non-finite feature".into()));
    }
    let (ng, nl) = (global.norm(), local.norm());
    if ng == 0.0 && nl == 0.0 {
        return Err(Error::Degenerate("both features are zero; similarity undefined".into()));
    }
    let mut sim = if ng == 0.0 || nl == 0.0 { 0.0 } else { local.dot(global) / (nl * ng) };
    if clamp {
        sim = sim.clamp(0.0, 1.0);
    }
    Ok(FeatureVec(
        global
            .0
            .iter()
            .zip(&local.0)
            .map(|(g, l)| sim * g + (1.0 - sim) * l)
            .collect(),
    ))
}

pub fn encode_frame_global(frame: &Frame, enc: &EncoderHandle) -> Result<FeatureVec> {
    enc.encode(
        RegionKey {
            frame: frame.index,
            instance: 0,
        },
        &RgbRegion::full(frame),
    )
}

/// Tight `(col0, row0, col1, row1)` inclusive rectangle of every nonzero ID.
pub fn mask_extents(frame: &Frame) -> BTreeMap<u32, (usize, usize, usize, usize)> {
    let w = frame.width as usize;
    let mut ext: BTreeMap<u32, (usize, usize, usize, usize)> = BTreeMap::new();
    for (k, &id) in frame.mask.iter().enumerate() {
        if id == 0 {
            continue;
        }
        let (r, c) = (k / w, k % w);
        ext.entry(id)
            .and_modify(|e| {
                e.0 = e.0.min(c);
                e.1 = e.1.min(r);
                e.2 = e.2.max(c);
                e.3 = e.3.max(r);
            })
            .or_insert((c, r, c, r));
    }
    ext
}

pub fn encode_instance_crops(frame: &Frame, enc: &EncoderHandle) -> Result<BTreeMap<u32, FeatureVec>> {
    mask_extents(frame)
        .into_iter()
        .map(|(id, (c0, r0, c1, r1))| {
            let region = RgbRegion::crop(frame, c0, r0, c1 - c0 + 1, r1 - r0 + 1)?;
            let f = enc.encode(RegionKey { frame: frame.index, instance: id }, &region)?;
            Ok((id, f))
        })
        .collect()
}

fn to_f32(v: &[f64]) -> Vec<f32> {
    v.iter().map(|&x| x as f32).collect()
}

/// Lifts one frame. Instance points share the blended feature and identity
/// code of their instance; background points carry the frame-global feature
/// and an all-zero code.
pub fn lift_frame(
    frame: &Frame,
    pose: &CameraPose,
    intrinsics: &Intrinsics,
    enc: &EncoderHandle,
    table: &InstanceEmbeddingTable,
    opts: LiftOptions,
) -> Result<PointCloud> {
    let d_vis = enc.d_vis();
    let d_ins = table.d_ins;
    let points = unproject(frame, intrinsics, pose)?;
    let global = encode_frame_global(frame, enc)?;
    let global32 = to_f32(&global.0);
    let zero_ins = vec![0.0f32; d_ins];

    let mut per_instance: BTreeMap<u32, (Vec<f32>, Vec<f32>)> = BTreeMap::new();
    for (id, local) in encode_instance_crops(frame, enc)? {
        let ins = table
            .get(id)
            .ok_or_else(|| Error::NotFound(format!("instance {id} in frame {} has no embedding", frame.index)))?;
        let vis = blend_features(&global, &local, opts.clamp_similarity)?;
        per_instance.insert(id, (to_f32(&vis.0), to_f32(ins)));
    }

    let mut pc = PointCloud::new(d_vis, d_ins);
    pc.pos.reserve(points.len());
    let t = frame.t as f32;
    for p in points {
        let pos = p.pos.map(|v| v as f32);
        if p.instance_id == 0 {
            pc.push(pos, &global32, &zero_ins, t, 0);
        } else {
            let (vis, ins) = &per_instance[&p.instance_id];
            pc.push(pos, vis, ins, t, p.instance_id);
        }
    }
    Ok(pc)
}

/// Lifts every frame (in parallel) and concatenates in frame order.
pub fn lift_sequence(
    seq: &SceneSequence,
    enc: &EncoderHandle,
    table: &InstanceEmbeddingTable,
    opts: LiftOptions,
) -> Result<PointCloud> {
    let parts = par::try_map_range(seq.len(), |i| {
        lift_frame(&seq.frames[i], &seq.poses[i], &seq.intrinsics, enc, table, opts)
    })?;
    let mut out = PointCloud::new(enc.d_vis(), table.d_ins);
    for p in parts {
        out.append(p)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{simulate, SimConfig};

    #[test]
    fn blend_identity_and_orthogonal() {
        let g = FeatureVec(vec![0.3, -0.4, 1.2]);
        assert_eq!(blend_features(&g, &g, false).unwrap().0.len(), 3);
        let same = blend_features(&g, &g, false).unwrap();
        for (a, b) in same.0.iter().zip(&g.0) {
            assert!((a - b).abs() < 1e-15);
        }
        let g = FeatureVec(vec![1.0, 0.0]);
        let l = FeatureVec(vec![0.0, 2.0]);
        assert_eq!(blend_features(&g, &l, false).unwrap(), l);
    }

    #[test]
    fn blend_worked_example() {
        let g = FeatureVec(vec![1.0, 0.0]);
        let l = FeatureVec(vec![0.6, 0.8]);
        let r = blend_features(&g, &l, false).unwrap();
        assert!((r.0[0] - 0.84).abs() < 1e-12);
        assert!((r.0[1] - 0.32).abs() < 1e-12);
    }

    #[test]
    fn blend_negative_similarity_not_clamped_by_default() {
        let g = FeatureVec(vec![1.0, 0.0]);
        let l = FeatureVec(vec![-1.0, 0.0]);
        // sim = -1: -1 * g + 2 * l = (-3, 0)
        assert_eq!(blend_features(&g, &l, false).unwrap().0, vec![-3.0, 0.0]);
        assert_eq!(blend_features(&g, &l, true).unwrap().0, vec![-1.0, 0.0]);
    }

    #[test]
    fn blend_errors() {
        let z = FeatureVec::zeros(3);
        assert!(matches!(blend_features(&z, &z, false), Err(Error::Degenerate(_))));
        assert!(blend_features(&FeatureVec::zeros(2), &FeatureVec(vec![1.0; 3]), false).is_err());
    }

    fn demo_seq() -> SceneSequence {
        let mut c = SimConfig::demo();
        c.duration = 1.0;
        simulate(&c).unwrap().sequence
    }

    #[test]
    fn global_equals_full_crop() {
        let seq = demo_seq();
        let enc = EncoderHandle::mock(16, 3);
        let f = &seq.frames[0];
        let g = encode_frame_global(f, &enc).unwrap();
        assert_eq!(g, mock_encode(&RgbRegion::full(f), 16, 3).unwrap());
        assert_eq!(g, encode_frame_global(f, &enc).unwrap());
    }

    #[test]
    fn no_instances_means_no_crops() {
        let mut f = demo_seq().frames[0].clone();
        f.mask.iter_mut().for_each(|m| *m = 0);
        assert!(encode_instance_crops(&f, &EncoderHandle::mock(8, 1)).unwrap().is_empty());
    }

    #[test]
    fn whole_frame_instance_matches_global() {
        let mut f = demo_seq().frames[0].clone();
        f.mask.iter_mut().for_each(|m| *m = 9);
        let enc = EncoderHandle::mock(8, 1);
        let crops = encode_instance_crops(&f, &enc).unwrap();
        assert_eq!(crops[&9], encode_frame_global(&f, &enc).unwrap());
    }

    #[test]
    fn crop_extents_match_scan() {
        let seq = demo_seq();
        let f = &seq.frames[0];
        let ext = mask_extents(f);
        assert!(ext.len() >= 2);
        for (&id, &(c0, r0, c1, r1)) in &ext {
            let (mut a, mut b, mut c, mut d) = (usize::MAX, usize::MAX, 0, 0);
            for r in 0..f.height as usize {
                for col in 0..f.width as usize {
                    if f.mask[r * f.width as usize + col] == id {
                        a = a.min(col);
                        b = b.min(r);
                        c = c.max(col);
                        d = d.max(r);
                    }
                }
            }
            assert_eq!((c0, r0, c1, r1), (a, b, c, d));
        }
    }

    #[test]
    fn lift_frame_contracts() {
        let seq = demo_seq();
        let enc = EncoderHandle::mock(16, 3);
        let table = instance_embedding_table(&seq.instance_ids(), 8, 7).unwrap();
        let f = &seq.frames[2];
        let pc = lift_frame(f, &seq.poses[2], &seq.intrinsics, &enc, &table, LiftOptions::default()).unwrap();
        assert_eq!(pc.len(), f.valid_depth_count());
        let global = to_f32(&encode_frame_global(f, &enc).unwrap().0);
        let mut first: BTreeMap<u32, PointRecord> = BTreeMap::new();
        for p in pc.iter() {
            assert_eq!(p.t, f.t as f32);
            if p.instance_id == 0 {
                assert_eq!(p.vis, &global[..]);
                assert!(p.ins.iter().all(|&v| v == 0.0));
            }
            let r = first.entry(p.instance_id).or_insert(p);
            assert_eq!(r.vis, p.vis);
            assert_eq!(r.ins, p.ins);
        }
        assert!(first.len() >= 3);
        // pure
        let again = lift_frame(f, &seq.poses[2], &seq.intrinsics, &enc, &table, LiftOptions::default()).unwrap();
        assert_eq!(pc, again);
    }

    #[test]
    fn all_background_frame() {
        let seq = demo_seq();
        let mut f = seq.frames[0].clone();
        f.mask.iter_mut().for_each(|m| *m = 0);
        let enc = EncoderHandle::mock(8, 3);
        let table = instance_embedding_table(&seq.instance_ids(), 8, 7).unwrap();
        let pc = lift_frame(&f, &seq.poses[0], &seq.intrinsics, &enc, &table, LiftOptions::default()).unwrap();
        let g = to_f32(&encode_frame_global(&f, &enc).unwrap().0);
        assert!(pc.iter().all(|p| p.vis == &g[..] && p.ins.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn sequence_count_and_file_round_trip() {
        let seq = demo_seq();
        let enc = EncoderHandle::mock(8, 3);
        let table = instance_embedding_table(&seq.instance_ids(), 4, 7).unwrap();
        let pc = lift_sequence(&seq, &enc, &table, LiftOptions::default()).unwrap();
        let expected: usize = seq.frames.iter().map(|f| f.valid_depth_count()).sum();
        assert_eq!(pc.len(), expected);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("points.d4dp");
        pc.save(&p).unwrap();
        assert_eq!(PointCloud::load(&p).unwrap(), pc);
    }
}
