//! Scene model: intrinsics, frames, instance registry and whole sequences.

mod camera;
mod io;

pub use camera::{project, unproject, Projection, UnprojectedPoint};
pub use io::{load_sequence, read_depth, read_mask, read_ppm, save_sequence, write_depth, write_mask, write_ppm};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use crate::geometry::{pose_to_matrix, BBox3D, CameraPose};

/// Pinhole intrinsics in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl Intrinsics {
    pub fn validate(&self) -> Result<()> {
        let ok = self.fx > 0.0
            && self.fy > 0.0
            && self.cx >= 0.0
            && self.cx < self.width as f64
            && self.cy >= 0.0
            && self.cy < self.height as f64;
        if !ok {
            return Err(Error::Config(format!("invalid intrinsics {self:?}")));
        }
        Ok(())
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }
}

/// One RGB-D frame with its instance mask. Row-major, `row * width + col`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub index: usize,
    pub t: f64,
    pub width: u32,
    pub height: u32,
    pub rgb: Vec<u8>,
    /// Meters; NaN marks an invalid sample.
    pub depth: Vec<f32>,
    /// Instance IDs, 0 is background.
    pub mask: Vec<u32>,
}

impl Frame {
    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn check_dims(&self) -> Result<()> {
        let n = self.pixel_count();
        if self.rgb.len() != 3 * n || self.depth.len() != n || self.mask.len() != n {
            return Err(Error::Shape(format!(
                "frame {}: {}x{} but rgb/depth/mask lengths {}/{}/{}",
                self.index,
                self.width,
                self.height,
                self.rgb.len(),
                self.depth.len(),
                self.mask.len()
            )));
        }
        Ok(())
    }

    pub fn rgb_at(&self, row: u32, col: u32) -> [u8; 3] {
        let i = 3 * (row as usize * self.width as usize + col as usize);
        [self.rgb[i], self.rgb[i + 1], self.rgb[i + 2]]
    }

    pub fn valid_depth_count(&self) -> usize {
        self.depth.iter().filter(|d| is_valid_depth(**d)).count()
    }
}

#[inline]
pub fn is_valid_depth(d: f32) -> bool {
    d.is_finite() && d > 0.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimedBox {
    pub t: f64,
    pub bbox: BBox3D,
}

/// Registry entry for one globally unique instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub id: u32,
    pub label: String,
    /// Sorted by time; at most one box per frame timestamp.
    pub boxes: Vec<TimedBox>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSequence {
    pub fps: f64,
    pub intrinsics: Intrinsics,
    pub frames: Vec<Frame>,
    pub poses: Vec<CameraPose>,
    /// Sorted by id.
    pub instances: Vec<Instance>,
}

impl SceneSequence {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn instance(&self, id: u32) -> Option<&Instance> {
        self.instances
            .binary_search_by_key(&id, |i| i.id)
            .ok()
            .map(|k| &self.instances[k])
    }

    pub fn instance_ids(&self) -> Vec<u32> {
        self.instances.iter().map(|i| i.id).collect()
    }

    /// Checks the structural invariants tying frames, poses and registry.
    pub fn validate(&self) -> Result<()> {
        if !(self.fps > 0.0) {
            return Err(Error::Config(format!("fps must be > 0, got {}", self.fps)));
        }
        self.intrinsics.validate()?;
        if self.frames.len() != self.poses.len() {
            return Err(Error::Shape(format!(
                "{} frames but {} poses",
                self.frames.len(),
                self.poses.len()
            )));
        }
        for w in self.instances.windows(2) {
            if w[0].id >= w[1].id {
                return Err(Error::Config("instance registry must be sorted and unique".into()));
            }
        }
        if self.instances.iter().any(|i| i.id == 0) {
            return Err(Error::Config("instance id 0 is reserved for background".into()));
        }
        for (k, (f, p)) in self.frames.iter().zip(&self.poses).enumerate() {
            f.check_dims()?;
            if f.width != self.intrinsics.width || f.height != self.intrinsics.height {
                return Err(Error::Shape(format!("frame {k} size differs from intrinsics")));
            }
            if f.t != p.t {
                return Err(Error::Shape(format!("frame {k} timestamp {} != pose {}", f.t, p.t)));
            }
            if k > 0 && !(p.t > self.poses[k - 1].t) {
                return Err(Error::Shape(format!("pose timestamps not increasing at {k}")));
            }
            if let Some(&bad) = f.mask.iter().find(|&&id| id != 0 && self.instance(id).is_none()) {
                return Err(Error::NotFound(format!("mask id {bad} in frame {k} not in registry")));
            }
        }
        Ok(())
    }
}
