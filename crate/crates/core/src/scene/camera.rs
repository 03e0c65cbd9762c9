use nalgebra::Vector3;

use super::{is_valid_depth, Frame, Intrinsics};
use crate::error::{Error, Result};
use crate::geometry::{CameraPose, Vec3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnprojectedPoint {
    pub pos: Vec3,
    pub row: u32,
    pub col: u32,
    pub instance_id: u32,
    pub t: f64,
}

/// Lifts every valid-depth pixel into world coordinates.
pub fn unproject(frame: &Frame, intrinsics: &Intrinsics, pose: &CameraPose) -> Result<Vec<UnprojectedPoint>> {
    if frame.width != intrinsics.width || frame.height != intrinsics.height {
        return Err(Error::Shape(format!(
            "frame {} is {}x{}, intrinsics say {}x{}",
            frame.index, frame.width, frame.height, intrinsics.width, intrinsics.height
        )));
    }
    frame.check_dims()?;
    let r = pose.rotation()?;
    let t = Vector3::new(pose.x, pose.y, pose.z);
    let w = frame.width as usize;
    let mut out = Vec::with_capacity(frame.valid_depth_count());
    for (k, &d) in frame.depth.iter().enumerate() {
        if !is_valid_depth(d) {
            continue;
        }
        let (row, col) = (k / w, k % w);
        let d = d as f64;
        let cam = Vector3::new(
            (col as f64 - intrinsics.cx) * d / intrinsics.fx,
            (row as f64 - intrinsics.cy) * d / intrinsics.fy,
            d,
        );
        let p = r * cam + t;
        out.push(UnprojectedPoint {
            pos: [p.x, p.y, p.z],
            row: row as u32,
            col: col as u32,
            instance_id: frame.mask[k],
            t: frame.t,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Projection {
    Visible { u: f64, v: f64, depth: f64 },
    /// In front of the camera but outside the image rectangle.
    OutOfFrame { u: f64, v: f64, depth: f64 },
    Behind,
}

impl Projection {
    pub fn is_visible(&self) -> bool {
        matches!(self, Projection::Visible { .. })
    }
}

/// World point to pixel coordinates; the image covers `[-0.5, W - 0.5)` so
/// pixel centers sit on integer coordinates.
pub fn project(point: Vec3, intrinsics: &Intrinsics, pose: &CameraPose) -> Result<Projection> {
    let r = pose.rotation()?;
    let rel = Vector3::new(point[0] - pose.x, point[1] - pose.y, point[2] - pose.z);
    let c = r.transpose() * rel;
    if c.z <= 1e-6 {
        return Ok(Projection::Behind);
    }
    let u = intrinsics.fx * c.x / c.z + intrinsics.cx;
    let v = intrinsics.fy * c.y / c.z + intrinsics.cy;
    let inside = u >= -0.5 && u < intrinsics.width as f64 - 0.5 && v >= -0.5 && v < intrinsics.height as f64 - 0.5;
    Ok(if inside {
        Projection::Visible { u, v, depth: c.z }
    } else {
        Projection::OutOfFrame { u, v, depth: c.z }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Matrix3x4, Vector4};

    fn intr(w: u32, h: u32) -> Intrinsics {
        Intrinsics {
            fx: 50.0,
            fy: 55.0,
            cx: (w / 2) as f64,
            cy: (h / 2) as f64,
            width: w,
            height: h,
        }
    }

    fn frame(w: u32, h: u32, depth: Vec<f32>) -> Frame {
        let n = (w * h) as usize;
        Frame {
            index: 0,
            t: 0.5,
            width: w,
            height: h,
            rgb: vec![0; 3 * n],
            depth,
            mask: vec![0; n],
        }
    }

    #[test]
    fn principal_point_maps_to_axis() {
        let i = intr(4, 4);
        let mut d = vec![f32::NAN; 16];
        d[2 * 4 + 2] = 1.0;
        let pts = unproject(&frame(4, 4, d), &i, &CameraPose::identity(0.5)).unwrap();
        assert_eq!(pts.len(), 1);
        assert_eq!(pts[0].pos, [0.0, 0.0, 1.0]);
        assert_eq!(pts[0].t, 0.5);
    }

    #[test]
    fn nan_and_zero_depth_skipped() {
        let i = intr(4, 4);
        let mut d = vec![1.0f32; 16];
        d[0] = f32::NAN;
        d[5] = 0.0;
        d[7] = f32::INFINITY;
        let pts = unproject(&frame(4, 4, d), &i, &CameraPose::identity(0.5)).unwrap();
        assert_eq!(pts.len(), 13);
        assert!(!pts.iter().any(|p| (p.row, p.col) == (0, 0)));
    }

    #[test]
    fn full_image_matches_per_pixel_formula() {
        let i = intr(4, 4);
        let d: Vec<f32> = (0..16).map(|k| 0.5 + 0.25 * k as f32).collect();
        let pose = CameraPose::look(0.5, [1.0, -2.0, 1.5], 0.7, -0.2);
        let pts = unproject(&frame(4, 4, d.clone()), &i, &pose).unwrap();
        assert_eq!(pts.len(), 16);
        // scripted oracle: explicit homogeneous camera-to-world multiply
        let m = crate::geometry::pose_to_matrix(&pose).unwrap();
        for p in &pts {
            let z = d[(p.row * 4 + p.col) as usize] as f64;
            let cam = Vector4::new(
                (p.col as f64 - 2.0) / 50.0 * z,
                (p.row as f64 - 2.0) / 55.0 * z,
                z,
                1.0,
            );
            let w = m * cam;
            for a in 0..3 {
                assert!((w[a] - p.pos[a]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_error() {
        let f = frame(4, 4, vec![1.0; 16]);
        assert!(unproject(&f, &intr(5, 4), &CameraPose::identity(0.5)).is_err());
    }

    #[test]
    fn origin_is_behind() {
        let p = project([0.0; 3], &intr(4, 4), &CameraPose::identity(0.0)).unwrap();
        assert_eq!(p, Projection::Behind);
    }

    #[test]
    fn round_trip_pixels() {
        let i = intr(8, 6);
        let d: Vec<f32> = (0..48).map(|k| 0.3 + 0.1 * k as f32).collect();
        let pose = CameraPose::look(0.0, [0.2, 0.1, 1.4], -1.1, -0.4);
        for p in unproject(&frame(8, 6, d.clone()), &i, &pose).unwrap() {
            match project(p.pos, &i, &pose).unwrap() {
                Projection::Visible { u, v, depth } => {
                    assert!((u - p.col as f64).abs() < 1e-4);
                    assert!((v - p.row as f64).abs() < 1e-4);
                    assert!((depth - d[(p.row * 8 + p.col) as usize] as f64).abs() < 1e-6);
                }
                other => panic!("{other:?}"),
            }
        }
    }

    #[test]
    fn random_points_match_krt_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let i = intr(64, 48);
        let pose = CameraPose::look(0.0, [0.5, -0.3, 1.2], 0.4, -0.3);
        // oracle: K [R^T | -R^T t]
        let r = pose.rotation().unwrap();
        let rt = r.transpose();
        let tv = rt * Vector3::new(pose.x, pose.y, pose.z);
        let mut rt_t = Matrix3x4::zeros();
        rt_t.fixed_view_mut::<3, 3>(0, 0).copy_from(&rt);
        rt_t.set_column(3, &(-tv));
        let k = nalgebra::Matrix3::new(i.fx, 0.0, i.cx, 0.0, i.fy, i.cy, 0.0, 0.0, 1.0);
        let p_mat = k * rt_t;
        let mut max_err: f64 = 0.0;
        for _ in 0..1000 {
            let p = [rng.random_range(-3.0..4.0), rng.random_range(-3.0..3.0), rng.random_range(-1.0..3.0)];
            let h = p_mat * Vector4::new(p[0], p[1], p[2], 1.0);
            match project(p, &i, &pose).unwrap() {
                Projection::Behind => assert!(h.z <= 1e-6),
                Projection::Visible { u, v, depth } | Projection::OutOfFrame { u, v, depth } => {
                    max_err = max_err.max((u - h.x / h.z).abs()).max((v - h.y / h.z).abs());
                    assert!((depth - h.z).abs() < 1e-9);
                }
            }
        }
        assert!(max_err < 1e-4, "{max_err}");
    }
}
