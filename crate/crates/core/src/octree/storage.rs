use std::path::Path;

use crate::binio::{self, Reader, Writer, MAGIC_VOXELS};
use crate::error::{Error, Result};

use super::VoxelRecord;

/// Voxel records with their feature widths; the unit of the `D4DV` file.
///
/// The file stores positions and features as f32 and does not store cell
/// keys, so loaded records carry their index as `key`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct VoxelSet {
    pub d_vis: usize,
    pub d_ins: usize,
    pub voxels: Vec<VoxelRecord>,
}

impl VoxelSet {
    pub fn len(&self) -> usize {
        self.voxels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voxels.is_empty()
    }

    /// Size in bytes of the serialized file.
    pub fn encoded_len(&self) -> usize {
        16 + self
            .voxels
            .iter()
            .map(|v| 4 * (3 + self.d_vis + self.d_ins + 2 + v.times.len()))
            .sum::<usize>()
    }

    pub fn to_bytes(&self, path: &Path) -> Result<Vec<u8>> {
        let mut w = Writer::new(MAGIC_VOXELS);
        w.u32(binio::to_u32(self.len(), path, "count")?)
            .u32(binio::to_u32(self.d_vis, path, "d_vis")?)
            .u32(binio::to_u32(self.d_ins, path, "d_ins")?);
        for v in &self.voxels {
            if v.vis.len() != self.d_vis || v.ins.len() != self.d_ins {
                return Err(Error::Shape(format!(
                    "voxel has vis/ins widths {}/{}, set declares {}/{}",
                    v.vis.len(),
                    v.ins.len(),
                    self.d_vis,
                    self.d_ins
                )));
            }
            w.f32s(v.pos.map(|x| x as f32))
                .f32s(v.vis.iter().map(|&x| x as f32))
                .f32s(v.ins.iter().map(|&x| x as f32))
                .u32(binio::to_u32(v.times.len(), path, "n_times")?)
                .f32s(v.times.iter().copied())
                .u32(u32::try_from(v.count).map_err(|_| Error::format(path, "member count exceeds u32"))?);
        }
        Ok(w.into_inner())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        binio::write_file(path, &self.to_bytes(path)?)
    }

    pub fn from_bytes(path: &Path, data: &[u8]) -> Result<Self> {
        let mut r = Reader::new(path, data);
        r.magic(MAGIC_VOXELS)?;
        let count = r.u32("count")? as usize;
        let d_vis = r.u32("d_vis")? as usize;
        let d_ins = r.u32("d_ins")? as usize;
        let min_record = 4 * (3 + d_vis + d_ins + 2);
        if r.remaining() < count.saturating_mul(min_record) {
            return Err(Error::Truncated {
                path: path.into(),
                what: format!("{count} voxel records"),
            });
        }
        let mut voxels = Vec::with_capacity(count);
        for i in 0..count {
            let pos = [r.f32("pos")?, r.f32("pos")?, r.f32("pos")?].map(f64::from);
            let vis = r.f32_vec(d_vis, "vis")?.into_iter().map(f64::from).collect();
            let ins = r.f32_vec(d_ins, "ins")?.into_iter().map(f64::from).collect();
            let n_times = r.u32("n_times")? as usize;
            let times = r.f32_vec(n_times, "times")?;
            let count = r.u32("member count")? as u64;
            if count == 0 || times.is_empty() {
                return Err(Error::format(path, format!("voxel {i} has no members or no timestamps")));
            }
            if times.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(Error::format(path, format!("voxel {i} timestamps not strictly increasing")));
            }
            voxels.push(VoxelRecord {
                pos,
                vis,
                ins,
                times,
                count,
                key: i as u64,
            });
        }
        r.finish()?;
        Ok(VoxelSet { d_vis, d_ins, voxels })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(path, &binio::read_file(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> VoxelSet {
        VoxelSet {
            d_vis: 2,
            d_ins: 1,
            voxels: vec![
                VoxelRecord {
                    pos: [0.5, -1.25, 3.0],
                    vis: vec![0.25, 1.0],
                    ins: vec![-0.5],
                    times: vec![0.0, 0.2, 1.4],
                    count: 7,
                    key: 0,
                },
                VoxelRecord {
                    pos: [1.0, 2.0, 3.0],
                    vis: vec![0.0, 0.0],
                    ins: vec![1.0],
                    times: vec![2.0],
                    count: 1,
                    key: 1,
                },
            ],
        }
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("v.d4dv");
        let s = sample();
        s.save(&p).unwrap();
        assert_eq!(VoxelSet::load(&p).unwrap(), s);
        assert_eq!(std::fs::metadata(&p).unwrap().len() as usize, s.encoded_len());
    }

    #[test]
    fn truncation_and_magic() {
        let p = Path::new("mem.d4dv");
        let bytes = sample().to_bytes(p).unwrap();
        assert!(matches!(
            VoxelSet::from_bytes(p, &bytes[..bytes.len() - 3]),
            Err(Error::Truncated { .. })
        ));
        let mut bad = bytes.clone();
        bad[3] = b'X';
        assert!(matches!(VoxelSet::from_bytes(p, &bad), Err(Error::BadMagic { .. })));
    }

    #[test]
    fn rejects_width_mismatch() {
        let mut s = sample();
        s.voxels[0].vis.push(1.0);
        assert!(matches!(s.to_bytes(Path::new("x")), Err(Error::Shape(_))));
    }
}
