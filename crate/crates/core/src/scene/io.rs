//! Sequence directory format.
//!
//! ```text
//! manifest.json        fps, frame_count, intrinsics, instances [{id, label}]
//! poses.jsonl          {"t","x","y","z","qx","qy","qz","qw"} per frame
//! boxes.jsonl          {"t","id","center","half_extents","yaw"} per box
//! rgb_{i:06}.ppm       binary P6, maxval 255
//! depth_{i:06}.d4d     "D4DD", u32 w, u32 h, w*h f32 meters
//! mask_{i:06}.d4d      "D4DM", u32 w, u32 h, w*h u32 instance ids
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Frame, Instance, Intrinsics, SceneSequence, TimedBox};
use crate::binio::{self, Reader, Writer, MAGIC_DEPTH, MAGIC_MASK};
use crate::error::{Error, Result};
use crate::geometry::{BBox3D, CameraPose, Vec3};
use crate::par;

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    fps: f64,
    frame_count: usize,
    intrinsics: Intrinsics,
    instances: Vec<ManifestInstance>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestInstance {
    id: u32,
    label: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct BoxLine {
    t: f64,
    id: u32,
    center: Vec3,
    half_extents: Vec3,
    yaw: f64,
}

pub fn write_depth(path: &Path, width: u32, height: u32, depth: &[f32]) -> Result<()> {
    let mut w = Writer::new(MAGIC_DEPTH);
    w.u32(width).u32(height).f32s(depth.iter().copied());
    w.write_to(path)
}

pub fn read_depth(path: &Path) -> Result<(u32, u32, Vec<f32>)> {
    let data = binio::read_file(path)?;
    let mut r = Reader::new(path, &data);
    r.magic(MAGIC_DEPTH)?;
    let (w, h) = (r.u32("width")?, r.u32("height")?);
    let d = r.f32_vec(w as usize * h as usize, "depth payload")?;
    r.finish()?;
    Ok((w, h, d))
}

pub fn write_mask(path: &Path, width: u32, height: u32, mask: &[u32]) -> Result<()> {
    let mut w = Writer::new(MAGIC_MASK);
    w.u32(width).u32(height).u32s(mask.iter().copied());
    w.write_to(path)
}

pub fn read_mask(path: &Path) -> Result<(u32, u32, Vec<u32>)> {
    let data = binio::read_file(path)?;
    let mut r = Reader::new(path, &data);
    r.magic(MAGIC_MASK)?;
    let (w, h) = (r.u32("width")?, r.u32("height")?);
    let m = r.u32_vec(w as usize * h as usize, "mask payload")?;
    r.finish()?;
    Ok((w, h, m))
}

pub fn write_ppm(path: &Path, width: u32, height: u32, rgb: &[u8]) -> Result<()> {
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(rgb);
    binio::write_file(path, &out)
}

pub fn read_ppm(path: &Path) -> Result<(u32, u32, Vec<u8>)> {
    let data = binio::read_file(path)?;
    // header: magic, width, height, maxval separated by whitespace, then one
    // whitespace byte before the raster
    let mut fields = Vec::with_capacity(4);
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < data.len() && data[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < data.len() && data[pos] == b'#' {
            while pos < data.len() && data[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < data.len() && !data[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Truncated {
                path: path.into(),
                what: "ppm header".into(),
            });
        }
        fields.push(String::from_utf8_lossy(&data[start..pos]).into_owned());
    }
    if fields[0] != "P6" {
        return Err(Error::BadMagic {
            path: path.into(),
            expected: "P6".into(),
            found: fields[0].clone(),
        });
    }
    let parse = |s: &str, what: &str| -> Result<u32> {
        s.parse()
            .map_err(|_| Error::format(path, format!("bad ppm {what} {s:?}")))
    };
    let (w, h, maxval) = (parse(&fields[1], "width")?, parse(&fields[2], "height")?, parse(&fields[3], "maxval")?);
    if maxval != 255 {
        return Err(Error::format(path, format!("maxval {maxval} unsupported")));
    }
    pos += 1;
    let n = 3 * w as usize * h as usize;
    if data.len() < pos + n {
        return Err(Error::Truncated {
            path: path.into(),
            what: "ppm raster".into(),
        });
    }
    if data.len() > pos + n {
        return Err(Error::format(path, "trailing bytes after raster"));
    }
    Ok((w, h, data[pos..].to_vec()))
}

pub fn save_sequence(seq: &SceneSequence, dir: &Path) -> Result<()> {
    seq.validate()?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let manifest = Manifest {
        fps: seq.fps,
        frame_count: seq.frames.len(),
        intrinsics: seq.intrinsics,
        instances: seq
            .instances
            .iter()
            .map(|i| ManifestInstance {
                id: i.id,
                label: i.label.clone(),
            })
            .collect(),
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::json("manifest", e))?;
    binio::write_file(&dir.join("manifest.json"), text.as_bytes())?;
    binio::write_jsonl(&dir.join("poses.jsonl"), &seq.poses)?;

    let mut boxes: Vec<BoxLine> = seq
        .instances
        .iter()
        .flat_map(|inst| {
            inst.boxes.iter().map(move |b| BoxLine {
                t: b.t,
                id: inst.id,
                center: b.bbox.center,
                half_extents: b.bbox.half_extents,
                yaw: b.bbox.yaw,
            })
        })
        .collect();
    boxes.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.id.cmp(&b.id)));
    binio::write_jsonl(&dir.join("boxes.jsonl"), &boxes)?;

    par::try_map_range(seq.frames.len(), |i| {
        let f = &seq.frames[i];
        write_ppm(&dir.join(format!("rgb_{i:06}.ppm")), f.width, f.height, &f.rgb)?;
        write_depth(&dir.join(format!("depth_{i:06}.d4d")), f.width, f.height, &f.depth)?;
        write_mask(&dir.join(format!("mask_{i:06}.d4d")), f.width, f.height, &f.mask)
    })?;
    Ok(())
}

pub fn load_sequence(dir: &Path) -> Result<SceneSequence> {
    let mpath = dir.join("manifest.json");
    let text = fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::json(mpath.display().to_string(), e))?;
    let poses: Vec<CameraPose> = binio::read_jsonl(&dir.join("poses.jsonl"))?;
    if poses.len() != manifest.frame_count {
        return Err(Error::format(
            dir.join("poses.jsonl"),
            format!("{} poses but manifest frame_count {}", poses.len(), manifest.frame_count),
        ));
    }
    let intr = manifest.intrinsics;

    let frames = par::try_map_range(manifest.frame_count, |i| -> Result<Frame> {
        let rgb_path = dir.join(format!("rgb_{i:06}.ppm"));
        let depth_path = dir.join(format!("depth_{i:06}.d4d"));
        let mask_path = dir.join(format!("mask_{i:06}.d4d"));
        let (w0, h0, rgb) = read_ppm(&rgb_path)?;
        let (w1, h1, depth) = read_depth(&depth_path)?;
        let (w2, h2, mask) = read_mask(&mask_path)?;
        for (p, w, h) in [(&rgb_path, w0, h0), (&depth_path, w1, h1), (&mask_path, w2, h2)] {
            if (w, h) != (intr.width, intr.height) {
                return Err(Error::format(
                    p,
                    format!("{w}x{h} differs from intrinsics {}x{}", intr.width, intr.height),
                ));
            }
        }
        Ok(Frame {
            index: i,
            t: poses[i].t,
            width: w0,
            height: h0,
            rgb,
            depth,
            mask,
        })
    })?;

    let mut instances: Vec<Instance> = manifest
        .instances
        .into_iter()
        .map(|m| Instance {
            id: m.id,
            label: m.label,
            boxes: Vec::new(),
        })
        .collect();
    instances.sort_by_key(|i| i.id);
    let bpath = dir.join("boxes.jsonl");
    let lines: Vec<BoxLine> = if bpath.exists() { binio::read_jsonl(&bpath)? } else { Vec::new() };
    for b in lines {
        let k = instances
            .binary_search_by_key(&b.id, |i| i.id)
            .map_err(|_| Error::format(&bpath, format!("box for unknown instance {}", b.id)))?;
        instances[k].boxes.push(TimedBox {
            t: b.t,
            bbox: BBox3D::new(b.center, b.half_extents, b.yaw),
        });
    }
    for inst in &mut instances {
        inst.boxes.sort_by(|a, b| a.t.total_cmp(&b.t));
    }

    let seq = SceneSequence {
        fps: manifest.fps,
        intrinsics: intr,
        frames,
        poses,
        instances,
    };
    seq.validate()?;
    Ok(seq)
}
