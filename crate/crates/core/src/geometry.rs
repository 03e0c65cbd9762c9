//! Small fixed-size geometry used throughout the crate.
//!
//! Conventions: right-handed world with +z up; camera frame has +x right,
//! +y down and +z forward. Quaternions are Hamilton, stored scalar-last.

use nalgebra::{Matrix3, Matrix4, Rotation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];

const QUAT_TOL: f64 = 1e-6;

#[inline]
pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn distance(a: Vec3, b: Vec3) -> f64 {
    norm(sub(a, b))
}

/// Wraps an angle to (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut w = a.rem_euclid(two_pi);
    if w > std::f64::consts::PI {
        w -= two_pi;
    }
    w
}

/// Absolute angular difference folded into [0, pi].
pub fn angle_diff(a: f64, b: f64) -> f64 {
    wrap_angle(a - b).abs()
}

/// Rotates `v` about world +z by `yaw`.
pub fn rotate_z(v: Vec3, yaw: f64) -> Vec3 {
    let (s, c) = yaw.sin_cos();
    [c * v[0] - s * v[1], s * v[0] + c * v[1], v[2]]
}

/// Camera pose: camera-to-world transform stamped with a time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub qx: f64,
    pub qy: f64,
    pub qz: f64,
    pub qw: f64,
}

impl CameraPose {
    pub fn identity(t: f64) -> Self {
        CameraPose {
            t,
            x: 0.0,
            y: 0.0,
            z: 0.0,
            qx: 0.0,
            qy: 0.0,
            qz: 0.0,
            qw: 1.0,
        }
    }

    pub fn translation(&self) -> Vec3 {
        [self.x, self.y, self.z]
    }

    pub fn quat_norm(&self) -> f64 {
        (self.qx * self.qx + self.qy * self.qy + self.qz * self.qz + self.qw * self.qw).sqrt()
    }

    /// The pose as the 7-vector (x, y, z, qx, qy, qz, qw).
    pub fn as_array(&self) -> [f64; 7] {
        [self.x, self.y, self.z, self.qx, self.qy, self.qz, self.qw]
    }

    /// Camera looking along `yaw` (about +z) tilted by `pitch` (positive up),
    /// with no roll.
    pub fn look(t: f64, position: Vec3, yaw: f64, pitch: f64) -> Self {
        let (sy, cy) = yaw.sin_cos();
        let (sp, cp) = pitch.sin_cos();
        let forward = Vector3::new(cy * cp, sy * cp, sp);
        let right = Vector3::new(sy, -cy, 0.0);
        let down = forward.cross(&right);
        let m = Matrix3::from_columns(&[right, down, forward]);
        let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(m));
        let mut c = [q.i, q.j, q.k, q.w];
        if c[3] < 0.0 {
            c = c.map(|v| -v);
        }
        CameraPose {
            t,
            x: position[0],
            y: position[1],
            z: position[2],
            qx: c[0],
            qy: c[1],
            qz: c[2],
            qw: c[3],
        }
    }

    /// Rotation block, camera-to-world.
    pub fn rotation(&self) -> Result<Matrix3<f64>> {
        let n = self.quat_norm();
        if (n - 1.0).abs() > QUAT_TOL {
            return Err(Error::NonUnitQuaternion { norm: n });
        }
        let (x, y, z, w) = (self.qx, self.qy, self.qz, self.qw);
        Ok(Matrix3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - z * w),
            2.0 * (x * z + y * w),
            2.0 * (x * y + z * w),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - x * w),
            2.0 * (x * z - y * w),
            2.0 * (y * z + x * w),
            1.0 - 2.0 * (x * x + y * y),
        ))
    }
}

/// Camera-to-world 4x4 rigid transform.
pub fn pose_to_matrix(pose: &CameraPose) -> Result<Matrix4<f64>> {
    let r = pose.rotation()?;
    let mut m = Matrix4::identity();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
    m[(0, 3)] = pose.x;
    m[(1, 3)] = pose.y;
    m[(2, 3)] = pose.z;
    Ok(m)
}

/// Oriented 3D box: rotation about world +z only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox3D {
    pub center: Vec3,
    pub half_extents: Vec3,
    pub yaw: f64,
}

impl BBox3D {
    pub fn new(center: Vec3, half_extents: Vec3, yaw: f64) -> Self {
        BBox3D {
            center,
            half_extents,
            yaw,
        }
    }

    pub fn volume(&self) -> f64 {
        8.0 * self.half_extents[0] * self.half_extents[1] * self.half_extents[2]
    }

    pub fn is_valid(&self) -> bool {
        self.half_extents.iter().all(|&h| h > 0.0 && h.is_finite())
            && self.center.iter().all(|c| c.is_finite())
            && self.yaw.is_finite()
    }

    /// World point into the box's local frame.
    pub fn to_local(&self, p: Vec3) -> Vec3 {
        rotate_z(sub(p, self.center), -self.yaw)
    }

    pub fn contains(&self, p: Vec3, tol: f64) -> bool {
        let l = self.to_local(p);
        (0..3).all(|a| l[a].abs() <= self.half_extents[a] + tol)
    }

    /// Footprint corners (counter-clockwise) in the xy plane.
    pub fn footprint(&self) -> [[f64; 2]; 4] {
        let [hx, hy, _] = self.half_extents;
        let local = [[hx, hy], [-hx, hy], [-hx, -hy], [hx, -hy]];
        local.map(|[x, y]| {
            let w = rotate_z([x, y, 0.0], self.yaw);
            [w[0] + self.center[0], w[1] + self.center[1]]
        })
    }

    /// Nearest positive ray parameter `s` at which `origin + s * dir` enters
    /// the box (slab test in the box frame).
    pub fn ray_entry(&self, origin: Vec3, dir: Vec3) -> Option<f64> {
        let o = self.to_local(origin);
        let d = rotate_z(dir, -self.yaw);
        let mut t_near = f64::NEG_INFINITY;
        let mut t_far = f64::INFINITY;
        for a in 0..3 {
            let h = self.half_extents[a];
            if d[a].abs() < 1e-15 {
                if o[a].abs() > h {
                    return None;
                }
                continue;
            }
            let inv = 1.0 / d[a];
            let (mut t0, mut t1) = ((-h - o[a]) * inv, (h - o[a]) * inv);
            if t0 > t1 {
                std::mem::swap(&mut t0, &mut t1);
            }
            t_near = t_near.max(t0);
            t_far = t_far.min(t1);
            if t_near > t_far {
                return None;
            }
        }
        (t_near > 1e-9).then_some(t_near)
    }
}

/// Axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Aabb { min, max }
    }

    pub fn contains(&self, p: Vec3) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] && p[a] <= self.max[a])
    }

    pub fn extent(&self) -> Vec3 {
        sub(self.max, self.min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rodrigues(axis: Vec3, angle: f64) -> Matrix3<f64> {
        let k = scale(axis, 1.0 / norm(axis));
        let kx = Matrix3::new(0.0, -k[2], k[1], k[2], 0.0, -k[0], -k[1], k[0], 0.0);
        Matrix3::identity() + kx * angle.sin() + kx * kx * (1.0 - angle.cos())
    }

    #[test]
    fn identity_quaternion_gives_identity() {
        let m = pose_to_matrix(&CameraPose::identity(0.0)).unwrap();
        assert_eq!(m, Matrix4::identity());
    }

    #[test]
    fn translation_column() {
        let mut p = CameraPose::identity(0.0);
        (p.x, p.y, p.z) = (1.0, 2.0, 3.0);
        let m = pose_to_matrix(&p).unwrap();
        assert_eq!(m.fixed_view::<3, 3>(0, 0).into_owned(), Matrix3::identity());
        assert_eq!([m[(0, 3)], m[(1, 3)], m[(2, 3)]], [1.0, 2.0, 3.0]);
    }

    #[test]
    fn quarter_turn_about_z_matches_rodrigues() {
        let h = std::f64::consts::FRAC_PI_4;
        let mut p = CameraPose::identity(0.0);
        (p.qz, p.qw) = (h.sin(), h.cos());
        let r = p.rotation().unwrap();
        let oracle = rodrigues([0.0, 0.0, 1.0], std::f64::consts::FRAC_PI_2);
        assert!((r - oracle).abs().max() < 1e-15);
        // x axis maps to y axis
        assert!((r.column(0) - Vector3::new(0.0, 1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn non_unit_quaternion_rejected() {
        let mut p = CameraPose::identity(0.0);
        p.qw = 1.01;
        assert!(matches!(pose_to_matrix(&p), Err(Error::NonUnitQuaternion { .. })));
    }

    #[test]
    fn look_pose_axes() {
        let p = CameraPose::look(0.0, [0.0; 3], 0.0, 0.0);
        let r = p.rotation().unwrap();
        // camera forward (+z) is world +x, camera down (+y) is world -z
        assert!((r.column(2) - Vector3::new(1.0, 0.0, 0.0)).norm() < 1e-12);
        assert!((r.column(1) - Vector3::new(0.0, 0.0, -1.0)).norm() < 1e-12);
    }

    #[test]
    fn ray_hits_unit_cube_front_face() {
        let b = BBox3D::new([2.0, 0.0, 0.0], [0.5; 3], 0.3);
        let s = BBox3D::new([2.0, 0.0, 0.0], [0.5; 3], 0.0)
            .ray_entry([0.0; 3], [1.0, 0.0, 0.0])
            .unwrap();
        assert!((s - 1.5).abs() < 1e-12);
        assert!(b.ray_entry([0.0; 3], [-1.0, 0.0, 0.0]).is_none());
    }

    #[test]
    fn wrap_angle_range() {
        assert!((angle_diff(6.20, 0.0) - (std::f64::consts::TAU - 6.20)).abs() < 1e-12);
        assert!((wrap_angle(std::f64::consts::PI) - std::f64::consts::PI).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn rotation_is_orthonormal(a in -1.0f64..1.0, b in -1.0f64..1.0, c in -1.0f64..1.0, d in -1.0f64..1.0) {
            let n = (a * a + b * b + c * c + d * d).sqrt();
            prop_assume!(n > 1e-3);
            let p = CameraPose { t: 0.0, x: 0.0, y: 0.0, z: 0.0, qx: a / n, qy: b / n, qz: c / n, qw: d / n };
            let r = p.rotation().unwrap();
            let e = (r.transpose() * r - Matrix3::identity()).abs().max();
            prop_assert!(e < 1e-9);
        }

        #[test]
        fn look_round_trip(yaw in -3.0f64..3.0, pitch in -1.2f64..1.2) {
            let p = CameraPose::look(0.0, [1.0, 2.0, 3.0], yaw, pitch);
            prop_assert!((p.quat_norm() - 1.0).abs() < 1e-12);
            let r = p.rotation().unwrap();
            let f = r.column(2);
            prop_assert!((f[2] - pitch.sin()).abs() < 1e-9);
            prop_assert!(angle_diff(f[1].atan2(f[0]), yaw) < 1e-9);
        }
    }
}
