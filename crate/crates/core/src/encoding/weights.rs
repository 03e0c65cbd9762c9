//! Fusion and camera weights: seeded init and the `D4DW` tensor file.
//!
//! Values are held as f64 but always f32-representable, so a save/load
//! round trip is bit-exact.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::binio::{self, Reader, Writer, MAGIC_WEIGHTS};
use crate::error::{Error, Result};

/// Number of pose parameters: translation plus quaternion.
pub const POSE_DIM: usize = 7;
pub const DEFAULT_M: usize = 8;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    /// `self · x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WeightDims {
    pub d_vis: usize,
    pub d_ins: usize,
    pub m: usize,
}

impl WeightDims {
    pub fn new(d_vis: usize, d_ins: usize, m: usize) -> Result<Self> {
        if d_vis == 0 || d_vis % 2 != 0 {
            return Err(Error::Config(format!("d_vis must be even and positive, got {d_vis}")));
        }
        if d_ins == 0 || m == 0 {
            return Err(Error::Config("d_ins and M must be >= 1".into()));
        }
        Ok(WeightDims { d_vis, d_ins, m })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionWeights {
    /// d_vis × d_ins.
    pub w_ins: Mat,
    /// d_vis × 3·d_vis.
    pub w_in: Mat,
    pub q: Mat,
    pub k: Mat,
    pub v: Mat,
    pub o: Mat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CameraWeights {
    /// d_vis × 7.
    pub proj: Mat,
    pub bias: Vec<f64>,
    /// M × d_vis.
    pub queries: Mat,
    pub k: Mat,
    pub v: Mat,
    pub o: Mat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights {
    pub fusion: FusionWeights,
    pub camera: CameraWeights,
}

fn tensor_shapes(d: WeightDims) -> Vec<(&'static str, Vec<usize>, usize)> {
    let dv = d.d_vis;
    vec![
        ("w_ins", vec![dv, d.d_ins], d.d_ins),
        ("fuse_in", vec![dv, 3 * dv], 3 * dv),
        ("fuse_q", vec![dv, dv], dv),
        ("fuse_k", vec![dv, dv], dv),
        ("fuse_v", vec![dv, dv], dv),
        ("fuse_o", vec![dv, dv], dv),
        ("cam_proj", vec![dv, POSE_DIM], POSE_DIM),
        ("cam_bias", vec![dv], POSE_DIM),
        ("cam_queries", vec![d.m, dv], dv),
        ("cam_k", vec![dv, dv], dv),
        ("cam_v", vec![dv, dv], dv),
        ("cam_o", vec![dv, dv], dv),
    ]
}

fn mat(dims: &[usize], data: Vec<f64>) -> Mat {
    Mat {
        rows: dims[0],
        cols: dims[1],
        data,
    }
}

impl ModelWeights {
    pub fn dims(&self) -> WeightDims {
        WeightDims {
            d_vis: self.fusion.w_ins.rows,
            d_ins: self.fusion.w_ins.cols,
            m: self.camera.queries.rows,
        }
    }

    /// Uniform in ±1/√fan_in, drawn in file tensor order from ChaCha8.
    pub fn init(seed: u64, dims: WeightDims) -> Result<Self> {
        let dims = WeightDims::new(dims.d_vis, dims.d_ins, dims.m)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tensors = BTreeMap::new();
        for (name, shape, fan_in) in tensor_shapes(dims).into_iter() {
            let bound = 1.0 / (fan_in as f64).sqrt();
            let n: usize = shape.iter().product();
            let data = (0..n)
                .map(|_| rng.random_range(-bound..=bound) as f32 as f64)
                .collect();
            tensors.insert(name, (shape, data));
        }
        Self::from_tensors(tensors, Path::new("<init>"))
    }

    /// All tensors zero; fusion then passes visual features through.
    pub fn zeros(dims: WeightDims) -> Result<Self> {
        let dims = WeightDims::new(dims.d_vis, dims.d_ins, dims.m)?;
        let tensors = tensor_shapes(dims)
            .into_iter()
            .map(|(name, shape, _)| {
                let n = shape.iter().product();
                (name, (shape, vec![0.0; n]))
            })
            .collect();
        Self::from_tensors(tensors, Path::new("<zeros>"))
    }

    fn from_tensors(mut t: BTreeMap<&str, (Vec<usize>, Vec<f64>)>, path: &Path) -> Result<Self> {
        fn take(
            t: &mut BTreeMap<&str, (Vec<usize>, Vec<f64>)>,
            expected: Option<&BTreeMap<&str, Vec<usize>>>,
            name: &str,
            path: &Path,
        ) -> Result<(Vec<usize>, Vec<f64>)> {
            let (shape, data) = t
                .remove(name)
                .ok_or_else(|| Error::format(path, format!("missing tensor {name:?}")))?;
            if let Some(want) = expected.map(|e| &e[name]) {
                if &shape != want {
                    return Err(Error::Shape(format!("tensor {name:?} has shape {shape:?}, expected {want:?}")));
                }
            }
            Ok((shape, data))
        }
        let (s, d) = take(&mut t, None, "w_ins", path)?;
        let w_ins = mat(&s, d);
        let (s, d) = take(&mut t, None, "cam_queries", path)?;
        let queries = mat(&s, d);
        let dims = WeightDims::new(w_ins.rows, w_ins.cols, queries.rows)?;
        if queries.cols != dims.d_vis {
            return Err(Error::Shape(format!(
                "tensor \"cam_queries\" has {} columns, expected {}",
                queries.cols, dims.d_vis
            )));
        }
        let expected: BTreeMap<&str, Vec<usize>> =
            tensor_shapes(dims).into_iter().map(|(n, s, _)| (n, s)).collect();
        let mut m = |name: &str| take(&mut t, Some(&expected), name, path).map(|(s, d)| mat(&s, d));
        let fusion = FusionWeights {
            w_ins,
            w_in: m("fuse_in")?,
            q: m("fuse_q")?,
            k: m("fuse_k")?,
            v: m("fuse_v")?,
            o: m("fuse_o")?,
        };
        let proj = m("cam_proj")?;
        let (k, v, o) = (m("cam_k")?, m("cam_v")?, m("cam_o")?);
        let bias = take(&mut t, Some(&expected), "cam_bias", path)?.1;
        if let Some(extra) = t.keys().next() {
            return Err(Error::format(path, format!("unexpected tensor {extra:?}")));
        }
        let w = ModelWeights {
            fusion,
            camera: CameraWeights { proj, bias, queries, k, v, o },
        };
        w.validate()?;
        Ok(w)
    }

    fn named(&self) -> Vec<(&'static str, Vec<usize>, &[f64])> {
        let f = &self.fusion;
        let c = &self.camera;
        let m2 = |m: &Mat| vec![m.rows, m.cols];
        vec![
            ("w_ins", m2(&f.w_ins), &f.w_ins.data[..]),
            ("fuse_in", m2(&f.w_in), &f.w_in.data[..]),
            ("fuse_q", m2(&f.q), &f.q.data[..]),
            ("fuse_k", m2(&f.k), &f.k.data[..]),
            ("fuse_v", m2(&f.v), &f.v.data[..]),
            ("fuse_o", m2(&f.o), &f.o.data[..]),
            ("cam_proj", m2(&c.proj), &c.proj.data[..]),
            ("cam_bias", vec![c.bias.len()], &c.bias[..]),
            ("cam_queries", m2(&c.queries), &c.queries.data[..]),
            ("cam_k", m2(&c.k), &c.k.data[..]),
            ("cam_v", m2(&c.v), &c.v.data[..]),
            ("cam_o", m2(&c.o), &c.o.data[..]),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        let f = &self.fusion;
        let c = &self.camera;
        let all = [&f.w_ins, &f.w_in, &f.q, &f.k, &f.v, &f.o, &c.proj, &c.queries, &c.k, &c.v, &c.o];
        if all.iter().any(|m| !m.is_finite()) || c.bias.iter().any(|v| !v.is_finite()) {
            return Err(Error::Degenerate("non-finite weight".into()));
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let named = self.named();
        let mut w = Writer::new(MAGIC_WEIGHTS);
        w.u32(named.len() as u32);
        for (name, shape, data) in named {
            w.u32(name.len() as u32).bytes(name.as_bytes()).u32(shape.len() as u32);
            w.u32s(shape.iter().map(|&d| d as u32));
            w.f32s(data.iter().map(|&v| v as f32));
        }
        w.into_inner()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        binio::write_file(path, &self.to_bytes())
    }

    pub fn from_bytes(path: &Path, data: &[u8]) -> Result<Self> {
        let mut r = Reader::new(path, data);
        r.magic(MAGIC_WEIGHTS)?;
        let n = r.u32("tensor count")?;
        let mut tensors: BTreeMap<String, (Vec<usize>, Vec<f64>)> = BTreeMap::new();
        for _ in 0..n {
            let len = r.u32("tensor name length")? as usize;
            let name = String::from_utf8(r.bytes(len, "tensor name")?.to_vec())
                .map_err(|_| Error::format(path, "tensor name is not utf-8"))?;
            let rank = r.u32("tensor rank")? as usize;
            let shape: Vec<usize> = r.u32_vec(rank, "tensor dims")?.into_iter().map(|d| d as usize).collect();
            let count = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
            let count = count.ok_or_else(|| Error::format(path, format!("tensor {name:?} too large")))?;
            let vals = r.f32_vec(count, &format!("tensor {name:?} payload"))?;
            tensors.insert(name, (shape, vals.into_iter().map(f64::from).collect()));
        }
        r.finish()?;
        let known: BTreeMap<&str, (Vec<usize>, Vec<f64>)> = tensors
            .iter()
            .map(|(k, v)| (k.as_str(), v.clone()))
            .collect();
        for (name, (shape, _)) in &known {
            let want_rank = if *name == "cam_bias" { 1 } else { 2 };
            if shape.len() != want_rank {
                return Err(Error::Shape(format!("tensor {name:?} has rank {}, expected {want_rank}", shape.len())));
            }
        }
        Self::from_tensors(known, path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(path, &binio::read_file(path)?)
    }
}
