use std::path::Path;

use crate::binio::{self, Reader, Writer, MAGIC_POINTS};
use crate::error::{Error, Result};

/// Lifted points stored column-wise.
///
/// Record `i` is `pos[i]`, `vis[i*d_vis..]`, `ins[i*d_ins..]`, `t[i]`,
/// `instance[i]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub d_vis: usize,
    pub d_ins: usize,
    pub pos: Vec<[f32; 3]>,
    pub vis: Vec<f32>,
    pub ins: Vec<f32>,
    pub t: Vec<f32>,
    pub instance: Vec<u32>,
}

/// Borrowed view of one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointRecord<'a> {
    pub pos: [f32; 3],
    pub vis: &'a [f32],
    pub ins: &'a [f32],
    pub t: f32,
    pub instance_id: u32,
}

impl PointCloud {
    pub fn new(d_vis: usize, d_ins: usize) -> Self {
        PointCloud {
            d_vis,
            d_ins,
            ..Default::default()
        }
    }

    pub fn len(&self) -> usize {
        self.pos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pos.is_empty()
    }

    pub fn push(&mut self, pos: [f32; 3], vis: &[f32], ins: &[f32], t: f32, instance_id: u32) {
        debug_assert_eq!(vis.len(), self.d_vis);
        debug_assert_eq!(ins.len(), self.d_ins);
        self.pos.push(pos);
        self.vis.extend_from_slice(vis);
        self.ins.extend_from_slice(ins);
        self.t.push(t);
        self.instance.push(instance_id);
    }

    pub fn get(&self, i: usize) -> PointRecord<'_> {
        PointRecord {
            pos: self.pos[i],
            vis: &self.vis[i * self.d_vis..(i + 1) * self.d_vis],
            ins: &self.ins[i * self.d_ins..(i + 1) * self.d_ins],
            t: self.t[i],
            instance_id: self.instance[i],
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = PointRecord<'_>> {
        (0..self.len()).map(|i| self.get(i))
    }

    pub fn append(&mut self, other: PointCloud) -> Result<()> {
        if other.is_empty() {
            return Ok(());
        }
        if self.is_empty() && self.d_vis == 0 && self.d_ins == 0 {
            self.d_vis = other.d_vis;
            self.d_ins = other.d_ins;
        }
        if (self.d_vis, self.d_ins) != (other.d_vis, other.d_ins) {
            return Err(Error::Shape("appending point clouds of different widths".into()));
        }
        self.pos.extend(other.pos);
        self.vis.extend(other.vis);
        self.ins.extend(other.ins);
        self.t.extend(other.t);
        self.instance.extend(other.instance);
        Ok(())
    }

    /// Keeps the first `n` points.
    pub fn truncate(&mut self, n: usize) {
        let n = n.min(self.len());
        self.pos.truncate(n);
        self.vis.truncate(n * self.d_vis);
        self.ins.truncate(n * self.d_ins);
        self.t.truncate(n);
        self.instance.truncate(n);
    }

    /// Points reordered by `perm` (`out[k] = self[perm[k]]`).
    pub fn permuted(&self, perm: &[usize]) -> PointCloud {
        let mut out = PointCloud::new(self.d_vis, self.d_ins);
        for &i in perm {
            let p = self.get(i);
            out.push(p.pos, p.vis, p.ins, p.t, p.instance_id);
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = Writer::new(MAGIC_POINTS);
        w.u32(binio::to_u32(self.len(), path, "count")?)
            .u32(binio::to_u32(self.d_vis, path, "d_vis")?)
            .u32(binio::to_u32(self.d_ins, path, "d_ins")?);
        for p in self.iter() {
            w.f32s(p.pos)
                .f32s(p.vis.iter().copied())
                .f32s(p.ins.iter().copied())
                .f32(p.t)
                .u32(p.instance_id);
        }
        w.write_to(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let data = binio::read_file(path)?;
        let mut r = Reader::new(path, &data);
        r.magic(MAGIC_POINTS)?;
        let count = r.u32("count")? as usize;
        let d_vis = r.u32("d_vis")? as usize;
        let d_ins = r.u32("d_ins")? as usize;
        let record = 4 * (3 + d_vis + d_ins + 2);
        if r.remaining() < count.saturating_mul(record) {
            return Err(Error::Truncated {
                path: path.into(),
                what: format!("{count} point records"),
            });
        }
        let mut pc = PointCloud::new(d_vis, d_ins);
        pc.pos.reserve(count);
        pc.vis.reserve(count * d_vis);
        pc.ins.reserve(count * d_ins);
        for _ in 0..count {
            let p = [r.f32("pos")?, r.f32("pos")?, r.f32("pos")?];
            pc.pos.push(p);
            r.f32_into(&mut pc.vis, d_vis, "vis")?;
            r.f32_into(&mut pc.ins, d_ins, "ins")?;
            pc.t.push(r.f32("t")?);
            pc.instance.push(r.u32("instance_id")?);
        }
        r.finish()?;
        Ok(pc)
    }
}
