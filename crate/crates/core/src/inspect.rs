//! Human-readable dumps of every artifact the pipeline writes.

use std::fmt::Write as _;
use std::path::Path;

use serde_json::Value;

use crate::binio::{self, MAGIC_DEPTH, MAGIC_FEATURES, MAGIC_MASK, MAGIC_POINTS, MAGIC_TOKENS, MAGIC_VOXELS, MAGIC_WEIGHTS};
use crate::encoding::{ModelWeights, SceneTokens};
use crate::error::{Error, Result};
use crate::lifting::{read_features, PointCloud};
use crate::octree::VoxelSet;
use crate::qa::{task_histogram, QAPair};
use crate::scene::{read_depth, read_mask, read_ppm};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArtifactKind {
    Depth,
    Mask,
    Features,
    Points,
    Voxels,
    Tokens,
    Weights,
    Ppm,
    Json,
    Jsonl,
}

/// Classifies by magic bytes, falling back to the extension for text files.
pub fn detect(path: &Path, head: &[u8]) -> Result<ArtifactKind> {
    let magic = head.get(..4);
    let by_magic = [
        (MAGIC_DEPTH, ArtifactKind::Depth),
        (MAGIC_MASK, ArtifactKind::Mask),
        (MAGIC_FEATURES, ArtifactKind::Features),
        (MAGIC_POINTS, ArtifactKind::Points),
        (MAGIC_VOXELS, ArtifactKind::Voxels),
        (MAGIC_TOKENS, ArtifactKind::Tokens),
        (MAGIC_WEIGHTS, ArtifactKind::Weights),
    ];
    if let Some(&(_, k)) = by_magic.iter().find(|(m, _)| magic == Some(&m[..])) {
        return Ok(k);
    }
    if head.starts_with(b"P6") {
        return Ok(ArtifactKind::Ppm);
    }
    match path.extension().and_then(|e| e.to_str()) {
        Some("jsonl") => Ok(ArtifactKind::Jsonl),
        Some("json") => Ok(ArtifactKind::Json),
        _ => Err(Error::format(
            path,
            format!("unknown magic {:?}", String::from_utf8_lossy(magic.unwrap_or(head))),
        )),
    }
}

fn row(v: &[f64]) -> String {
    const SHOW: usize = 6;
    let mut s: Vec<String> = v.iter().take(SHOW).map(|x| format!("{x:.4}")).collect();
    if v.len() > SHOW {
        s.push(format!("... ({} values)", v.len()));
    }
    format!("[{}]", s.join(", "))
}

fn first_last(n: usize) -> Vec<usize> {
    match n {
        0 => vec![],
        1 => vec![0],
        _ => vec![0, n - 1],
    }
}

fn f32s(v: &[f32]) -> Vec<f64> {
    v.iter().map(|&x| x as f64).collect()
}

/// Header and first/last records of `path`.
pub fn inspect_file(path: &Path) -> Result<String> {
    let data = binio::read_file(path)?;
    let mut o = String::new();
    match detect(path, &data)? {
        ArtifactKind::Depth => {
            let (w, h, d) = read_depth(path)?;
            let valid: Vec<f32> = d.iter().copied().filter(|x| x.is_finite() && *x > 0.0).collect();
            let (lo, hi) = valid.iter().fold((f32::INFINITY, f32::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
            let _ = writeln!(o, "depth map {w}x{h}\nvalid pixels: {}", valid.len());
            if !valid.is_empty() {
                let _ = writeln!(o, "range: {lo:.3} .. {hi:.3} m");
            }
        }
        ArtifactKind::Mask => {
            let (w, h, m) = read_mask(path)?;
            let mut ids: Vec<u32> = m.clone();
            ids.sort_unstable();
            ids.dedup();
            let _ = writeln!(o, "instance mask {w}x{h}\nids: {ids:?}");
        }
        ArtifactKind::Ppm => {
            let (w, h, _) = read_ppm(path)?;
            let _ = writeln!(o, "rgb image {w}x{h}");
        }
        ArtifactKind::Features => {
            let (count, dim, rows) = read_features(path)?;
            let _ = writeln!(o, "features: count {count}, dim {dim}");
            for i in first_last(count) {
                let _ = writeln!(o, "  [{i}] {}", row(&f32s(&rows[i * dim..(i + 1) * dim])));
            }
        }
        ArtifactKind::Points => {
            let pc = PointCloud::load(path)?;
            let _ = writeln!(o, "points: count {}, d_vis {}, d_ins {}", pc.len(), pc.d_vis, pc.d_ins);
            for i in first_last(pc.len()) {
                let p = pc.get(i);
                let _ = writeln!(
                    o,
                    "  [{i}] pos {:?} t {} instance {} vis {}",
                    p.pos,
                    p.t,
                    p.instance_id,
                    row(&f32s(p.vis))
                );
            }
        }
        ArtifactKind::Voxels => {
            let set = VoxelSet::from_bytes(path, &data)?;
            let members: u64 = set.voxels.iter().map(|v| v.count).sum();
            let _ = writeln!(o, "voxels: count {}, d_vis {}, d_ins {}", set.len(), set.d_vis, set.d_ins);
            let _ = writeln!(o, "member points: {members}");
            for i in first_last(set.len()) {
                let v = &set.voxels[i];
                let _ = writeln!(
                    o,
                    "  [{i}] pos [{:.4}, {:.4}, {:.4}] count {} times {} vis {}",
                    v.pos[0],
                    v.pos[1],
                    v.pos[2],
                    v.count,
                    v.times.len(),
                    row(&v.vis)
                );
            }
        }
        ArtifactKind::Tokens => {
            let t = SceneTokens::from_bytes(path, &data)?;
            let _ = writeln!(o, "tokens: scene {}, camera {}, d_vis {}", t.scene.len(), t.camera.len(), t.d_vis);
            for i in first_last(t.scene.len()) {
                let _ = writeln!(o, "  scene[{i}] {}", row(&t.scene[i]));
            }
            for i in first_last(t.camera.len()) {
                let _ = writeln!(o, "  camera[{i}] {}", row(&t.camera[i]));
            }
        }
        ArtifactKind::Weights => {
            let w = ModelWeights::from_bytes(path, &data)?;
            let d = w.dims();
            let _ = writeln!(o, "weights: d_vis {}, d_ins {}, M {}", d.d_vis, d.d_ins, d.m);
            let f = &w.fusion;
            let c = &w.camera;
            for (name, m) in [
                ("w_ins", &f.w_ins),
                ("fuse_in", &f.w_in),
                ("fuse_q", &f.q),
                ("fuse_k", &f.k),
                ("fuse_v", &f.v),
                ("fuse_o", &f.o),
                ("cam_proj", &c.proj),
                ("cam_queries", &c.queries),
                ("cam_k", &c.k),
                ("cam_v", &c.v),
                ("cam_o", &c.o),
            ] {
                let _ = writeln!(o, "  {name}: {}x{}", m.rows, m.cols);
            }
            let _ = writeln!(o, "  cam_bias: {}", c.bias.len());
        }
        ArtifactKind::Json => {
            let v: Value = serde_json::from_slice(&data).map_err(|e| Error::json(path.display().to_string(), e))?;
            let text = serde_json::to_string_pretty(&v).map_err(|e| Error::json(path.display().to_string(), e))?;
            o.push_str(&text);
            o.push('\n');
        }
        ArtifactKind::Jsonl => inspect_jsonl(path, &mut o)?,
    }
    Ok(o)
}

fn inspect_jsonl(path: &Path, o: &mut String) -> Result<()> {
    let rows: Vec<Value> = binio::read_jsonl(path)?;
    let is_qa = rows.first().is_some_and(|r| r.get("task").is_some() && r.get("cot").is_some());
    if is_qa {
        let pairs: Vec<QAPair> = binio::read_jsonl(path)?;
        let _ = writeln!(o, "qa pairs: {}", pairs.len());
        for (task, n) in task_histogram(&pairs) {
            let _ = writeln!(o, "  {task:<26} {n}");
        }
        for i in first_last(pairs.len()) {
            let p = &pairs[i];
            let _ = writeln!(o, "[{}] {}\n  -> {}", p.id, p.question, p.answer.to_text());
        }
        return Ok(());
    }
    let _ = writeln!(o, "json lines: {}", rows.len());
    for i in first_last(rows.len()) {
        let mut line = rows[i].to_string();
        if line.len() > 240 {
            let cut = (0..=240).rev().find(|&k| line.is_char_boundary(k)).unwrap_or(0);
            line.truncate(cut);
            line.push_str(" ...");
        }
        let _ = writeln!(o, "  [{i}] {line}");
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_magic_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.bin");
        std::fs::write(&p, b"XXXXjunk").unwrap();
        let err = inspect_file(&p).unwrap_err().to_string();
        assert!(err.contains("unknown magic"), "{err}");
    }

    #[test]
    fn truncated_voxel_file_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("v.d4dv");
        let mut bytes = MAGIC_VOXELS.to_vec();
        bytes.extend_from_slice(&5u32.to_le_bytes());
        std::fs::write(&p, bytes).unwrap();
        assert!(inspect_file(&p).is_err());
    }

    #[test]
    fn features_are_listed() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.d4df");
        crate::lifting::write_features(&p, 2, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        let s = inspect_file(&p).unwrap();
        assert!(s.starts_with("features: count 2, dim 2"), "{s}");
        assert!(s.contains("[1] [3.0000, 4.0000]"), "{s}");
    }
}
