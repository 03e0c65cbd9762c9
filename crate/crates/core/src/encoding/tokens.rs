use std::path::Path;

use crate::binio::{self, Reader, Writer, MAGIC_TOKENS};
use crate::error::{Error, Result};

/// Scene tokens followed by camera tokens, each `d_vis` wide.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneTokens {
    pub d_vis: usize,
    pub scene: Vec<Vec<f64>>,
    pub camera: Vec<Vec<f64>>,
}

impl SceneTokens {
    pub fn to_bytes(&self, path: &Path) -> Result<Vec<u8>> {
        if self.scene.iter().chain(&self.camera).any(|r| r.len() != self.d_vis) {
            return Err(Error::Shape(format!("token rows must all have width {}", self.d_vis)));
        }
        let mut w = Writer::new(MAGIC_TOKENS);
        w.u32(binio::to_u32(self.scene.len(), path, "n_scene_tokens")?)
            .u32(binio::to_u32(self.camera.len(), path, "M")?)
            .u32(binio::to_u32(self.d_vis, path, "d_vis")?);
        for r in self.scene.iter().chain(&self.camera) {
            w.f32s(r.iter().map(|&v| v as f32));
        }
        Ok(w.into_inner())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        binio::write_file(path, &self.to_bytes(path)?)
    }

    pub fn from_bytes(path: &Path, data: &[u8]) -> Result<Self> {
        let mut r = Reader::new(path, data);
        r.magic(MAGIC_TOKENS)?;
        let n = r.u32("n_scene_tokens")? as usize;
        let m = r.u32("M")? as usize;
        let d = r.u32("d_vis")? as usize;
        let mut rows = |k: usize, what: &str| -> Result<Vec<Vec<f64>>> {
            (0..k)
                .map(|_| Ok(r.f32_vec(d, what)?.into_iter().map(f64::from).collect()))
                .collect()
        };
        let scene = rows(n, "scene tokens")?;
        let camera = rows(m, "camera tokens")?;
        r.finish()?;
        Ok(SceneTokens { d_vis: d, scene, camera })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(path, &binio::read_file(path)?)
    }
}
