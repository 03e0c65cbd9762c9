//! Z-buffer rendering of oriented boxes over a floor plane.

use nalgebra::Vector3;

use crate::error::Result;
use crate::geometry::{Aabb, BBox3D, CameraPose};
use crate::scene::{Frame, Intrinsics};

/// One renderable box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderBox {
    pub id: u32,
    pub bbox: BBox3D,
    pub color: [u8; 3],
}

/// Everything visible at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneState {
    pub t: f64,
    pub boxes: Vec<RenderBox>,
    /// Floor plane `z = room.min.z`, limited to the room footprint.
    pub room: Aabb,
    pub floor_colors: [[u8; 3]; 2],
}

const FLOOR_TILE: f64 = 0.5;

/// Renders the state from `pose`. Pixels that hit nothing get depth NaN,
/// mask 0 and black.
pub fn rasterize(state: &SceneState, intrinsics: &Intrinsics, pose: &CameraPose, index: usize) -> Result<Frame> {
    let r = pose.rotation()?;
    let origin = pose.translation();
    let (w, h) = (intrinsics.width as usize, intrinsics.height as usize);
    let mut rgb = vec![0u8; 3 * w * h];
    let mut depth = vec![f32::NAN; w * h];
    let mut mask = vec![0u32; w * h];
    let floor_z = state.room.min[2];

    for row in 0..h {
        for col in 0..w {
            // camera ray with unit z, so the ray parameter is the depth
            let dc = Vector3::new(
                (col as f64 - intrinsics.cx) / intrinsics.fx,
                (row as f64 - intrinsics.cy) / intrinsics.fy,
                1.0,
            );
            let dw = r * dc;
            let dir = [dw.x, dw.y, dw.z];
            let mut best = f64::INFINITY;
            let mut hit: Option<(u32, [u8; 3])> = None;
            for b in &state.boxes {
                if let Some(s) = b.bbox.ray_entry(origin, dir) {
                    if s < best {
                        best = s;
                        hit = Some((b.id, b.color));
                    }
                }
            }
            if dir[2] < -1e-12 && origin[2] > floor_z {
                let s = (floor_z - origin[2]) / dir[2];
                let x = origin[0] + s * dir[0];
                let y = origin[1] + s * dir[1];
                let in_room = x >= state.room.min[0] && x <= state.room.max[0] && y >= state.room.min[1] && y <= state.room.max[1];
                if in_room && s < best {
                    best = s;
                    let tile = ((x / FLOOR_TILE).floor() as i64 + (y / FLOOR_TILE).floor() as i64).rem_euclid(2);
                    hit = Some((0, state.floor_colors[tile as usize]));
                }
            }
            if let Some((id, color)) = hit {
                let k = row * w + col;
                depth[k] = best as f32;
                mask[k] = id;
                rgb[3 * k..3 * k + 3].copy_from_slice(&color);
            }
        }
    }
    Ok(Frame {
        index,
        t: state.t,
        width: intrinsics.width,
        height: intrinsics.height,
        rgb,
        depth,
        mask,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn intr() -> Intrinsics {
        Intrinsics {
            fx: 40.0,
            fy: 40.0,
            cx: 16.0,
            cy: 12.0,
            width: 32,
            height: 24,
        }
    }

    fn state(boxes: Vec<RenderBox>) -> SceneState {
        SceneState {
            t: 0.0,
            boxes,
            room: Aabb::new([-5.0, -5.0, -10.0], [5.0, 5.0, 3.0]),
            floor_colors: [[90; 3], [110; 3]],
        }
    }

    fn forward_cam() -> CameraPose {
        CameraPose::look(0.0, [0.0, 0.0, 1.0], 0.0, 0.0)
    }

    #[test]
    fn facing_away_sees_only_background() {
        let b = RenderBox {
            id: 3,
            bbox: BBox3D::new([2.0, 0.0, 1.0], [0.5; 3], 0.0),
            color: [255, 0, 0],
        };
        let pose = CameraPose::look(0.0, [0.0, 0.0, 1.0], std::f64::consts::PI, 0.0);
        let f = rasterize(&state(vec![b]), &intr(), &pose, 0).unwrap();
        assert!(f.mask.iter().all(|&m| m == 0));
    }

    #[test]
    fn unit_cube_depth_at_principal_point() {
        let b = RenderBox {
            id: 3,
            bbox: BBox3D::new([2.0, 0.0, 1.0], [0.5; 3], 0.0),
            color: [255, 0, 0],
        };
        let f = rasterize(&state(vec![b]), &intr(), &forward_cam(), 0).unwrap();
        let k = 12 * 32 + 16;
        assert_eq!(f.mask[k], 3);
        assert_eq!(f.depth[k], 1.5);
        assert_eq!(f.rgb_at(12, 16), [255, 0, 0]);
    }

    #[test]
    fn nearer_box_wins_every_contested_pixel() {
        let near = RenderBox {
            id: 1,
            bbox: BBox3D::new([2.0, 0.2, 1.0], [0.3, 0.4, 0.3], 0.4),
            color: [10, 200, 10],
        };
        let far = RenderBox {
            id: 2,
            bbox: BBox3D::new([3.5, 0.0, 1.0], [0.5, 1.0, 0.8], -0.2),
            color: [10, 10, 200],
        };
        let i = intr();
        let pose = forward_cam();
        let f = rasterize(&state(vec![far, near]), &i, &pose, 0).unwrap();
        // oracle: intersect each box separately per pixel
        let rot = pose.rotation().unwrap();
        let mut contested = 0;
        for row in 0..24u32 {
            for col in 0..32u32 {
                let d = rot * Vector3::new((col as f64 - i.cx) / i.fx, (row as f64 - i.cy) / i.fy, 1.0);
                let dir = [d.x, d.y, d.z];
                let a = near.bbox.ray_entry(pose.translation(), dir);
                let b = far.bbox.ray_entry(pose.translation(), dir);
                let k = (row * 32 + col) as usize;
                match (a, b) {
                    (Some(sa), Some(sb)) => {
                        contested += 1;
                        let expect = if sa < sb { 1 } else { 2 };
                        assert_eq!(f.mask[k], expect);
                    }
                    (Some(_), None) => assert_eq!(f.mask[k], 1),
                    (None, Some(_)) => assert_eq!(f.mask[k], 2),
                    (None, None) => assert_eq!(f.mask[k], 0),
                }
            }
        }
        assert!(contested > 0);
    }
}
