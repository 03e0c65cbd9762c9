//! Pluggable image-region encoders.
//!
//! The mock encoder is a seeded random projection of an 8x8x8 colour
//! histogram; the file-backed encoder serves precomputed `D4DF` rows.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::binio::{self, Reader, Writer, MAGIC_FEATURES};
use crate::error::{Error, Result};
use crate::scene::Frame;

const BINS: usize = 8;
const HIST_LEN: usize = BINS * BINS * BINS;

/// Dense visual feature.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVec(pub Vec<f64>);

impl FeatureVec {
    pub fn zeros(d: usize) -> Self {
        FeatureVec(vec![0.0; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &FeatureVec) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn cosine(&self, other: &FeatureVec) -> Option<f64> {
        let n = self.norm() * other.norm();
        (n > 0.0).then(|| self.dot(other) / n)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Rectangle of an RGB raster, `(x0, y0)` top-left, inclusive-exclusive.
#[derive(Debug, Clone, Copy)]
pub struct RgbRegion<'a> {
    rgb: &'a [u8],
    stride: usize,
    pub x0: usize,
    pub y0: usize,
    pub width: usize,
    pub height: usize,
}

impl<'a> RgbRegion<'a> {
    pub fn from_pixels(width: usize, height: usize, rgb: &'a [u8]) -> Result<Self> {
        if rgb.len() != 3 * width * height {
            return Err(Error::Shape(format!("{} bytes for a {width}x{height} region", rgb.len())));
        }
        Ok(RgbRegion {
            rgb,
            stride: width,
            x0: 0,
            y0: 0,
            width,
            height,
        })
    }

    pub fn full(frame: &'a Frame) -> Self {
        RgbRegion {
            rgb: &frame.rgb,
            stride: frame.width as usize,
            x0: 0,
            y0: 0,
            width: frame.width as usize,
            height: frame.height as usize,
        }
    }

    pub fn crop(frame: &'a Frame, x0: usize, y0: usize, width: usize, height: usize) -> Result<Self> {
        if x0 + width > frame.width as usize || y0 + height > frame.height as usize {
            return Err(Error::Shape("crop outside frame".into()));
        }
        Ok(RgbRegion {
            rgb: &frame.rgb,
            stride: frame.width as usize,
            x0,
            y0,
            width,
            height,
        })
    }

    pub fn is_empty(&self) -> bool {
        self.width == 0 || self.height == 0
    }

    pub fn pixels(&self) -> impl Iterator<Item = [u8; 3]> + '_ {
        (self.y0..self.y0 + self.height).flat_map(move |r| {
            (self.x0..self.x0 + self.width).map(move |c| {
                let k = 3 * (r * self.stride + c);
                [self.rgb[k], self.rgb[k + 1], self.rgb[k + 2]]
            })
        })
    }
}

/// L1-normalised 8x8x8 colour histogram.
pub fn color_histogram(region: &RgbRegion) -> Result<Vec<f64>> {
    if region.is_empty() {
        return Err(Error::Empty("cannot encode an empty region".into()));
    }
    let mut h = vec![0.0; HIST_LEN];
    for [r, g, b] in region.pixels() {
        let bin = ((r as usize) >> 5) * BINS * BINS + ((g as usize) >> 5) * BINS + ((b as usize) >> 5);
        h[bin] += 1.0;
    }
    let n = (region.width * region.height) as f64;
    h.iter_mut().for_each(|v| *v /= n);
    Ok(h)
}

/// `d_vis x 512` matrix of +-1/sqrt(d_vis), row-major.
fn projection_matrix(d_vis: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = 1.0 / (d_vis as f64).sqrt();
    (0..d_vis * HIST_LEN).map(|_| if rng.random::<bool>() { s } else { -s }).collect()
}

fn project_normalize(proj: &[f64], hist: &[f64], d_vis: usize) -> Result<FeatureVec> {
    let mut out: Vec<f64> = (0..d_vis)
        .map(|r| {
            proj[r * HIST_LEN..(r + 1) * HIST_LEN]
                .iter()
                .zip(hist)
                .map(|(a, b)| a * b)
                .sum()
        })
        .collect();
    let n = out.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(n > 0.0) {
        return Err(Error::Encoder("projected histogram has zero norm".into()));
    }
    out.iter_mut().for_each(|v| *v /= n);
    Ok(FeatureVec(out))
}

/// Deterministic stand-in for a frozen vision encoder.
pub fn mock_encode(region: &RgbRegion, d_vis: usize, seed: u64) -> Result<FeatureVec> {
    MockEncoder::new(d_vis, seed).encode(region)
}

#[derive(Debug, Clone)]
pub struct MockEncoder {
    d_vis: usize,
    seed: u64,
    proj: Vec<f64>,
}

impl MockEncoder {
    pub fn new(d_vis: usize, seed: u64) -> Self {
        MockEncoder {
            d_vis,
            seed,
            proj: projection_matrix(d_vis, seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn encode(&self, region: &RgbRegion) -> Result<FeatureVec> {
        if self.d_vis == 0 {
            return Err(Error::Config("d_vis must be > 0".into()));
        }
        let h = color_histogram(region)?;
        project_normalize(&self.proj, &h, self.d_vis)
    }
}

/// Which region of which frame is being encoded; instance 0 is the full frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RegionKey {
    pub frame: usize,
    pub instance: u32,
}

#[derive(Debug, Serialize, Deserialize)]
struct IndexLine {
    frame: usize,
    id: u32,
    row: usize,
}

/// Precomputed features. Without a sidecar index, row `i` is the global
/// feature of frame `i`. The optional `<file>.index.jsonl` maps
/// `{"frame","id","row"}` so instance crops can be served too.
#[derive(Debug, Clone)]
pub struct FileEncoder {
    path: PathBuf,
    dim: usize,
    rows: Vec<f32>,
    index: Option<HashMap<RegionKey, usize>>,
}

impl FileEncoder {
    pub fn open(path: &Path) -> Result<Self> {
        let (count, dim, rows) = read_features(path)?;
        let idx_path = PathBuf::from(format!("{}.index.jsonl", path.display()));
        let index = if idx_path.exists() {
            let lines: Vec<IndexLine> = binio::read_jsonl(&idx_path)?;
            let mut map = HashMap::new();
            for l in lines {
                if l.row >= count {
                    return Err(Error::format(&idx_path, format!("row {} out of range", l.row)));
                }
                map.insert(RegionKey { frame: l.frame, instance: l.id }, l.row);
            }
            Some(map)
        } else {
            None
        };
        Ok(FileEncoder {
            path: path.to_path_buf(),
            dim,
            rows,
            index,
        })
    }

    pub fn row(&self, r: usize) -> Option<FeatureVec> {
        let s = self.rows.get(r * self.dim..(r + 1) * self.dim)?;
        Some(FeatureVec(s.iter().map(|&v| v as f64).collect()))
    }

    pub fn encode(&self, key: RegionKey) -> Result<FeatureVec> {
        let row = match &self.index {
            Some(map) => map.get(&key).copied(),
            None if key.instance == 0 => Some(key.frame),
            None => None,
        };
        row.and_then(|r| self.row(r)).ok_or_else(|| {
            Error::Encoder(format!(
                "{}: no feature for frame {} instance {}",
                self.path.display(),
                key.frame,
                key.instance
            ))
        })
    }
}

pub fn write_features(path: &Path, dim: usize, rows: &[f32]) -> Result<()> {
    if dim == 0 || rows.len() % dim != 0 {
        return Err(Error::Shape(format!("{} values not a multiple of dim {dim}", rows.len())));
    }
    let mut w = Writer::new(MAGIC_FEATURES);
    w.u32(binio::to_u32(rows.len() / dim, path, "count")?)
        .u32(binio::to_u32(dim, path, "dim")?)
        .f32s(rows.iter().copied());
    w.write_to(path)
}

pub fn read_features(path: &Path) -> Result<(usize, usize, Vec<f32>)> {
    let data = binio::read_file(path)?;
    let mut r = Reader::new(path, &data);
    r.magic(MAGIC_FEATURES)?;
    let count = r.u32("count")? as usize;
    let dim = r.u32("dim")? as usize;
    let rows = r.f32_vec(count * dim, "feature payload")?;
    r.finish()?;
    Ok((count, dim, rows))
}

/// A named encoder; pure in its inputs.
#[derive(Debug, Clone)]
pub enum EncoderHandle {
    Mock(MockEncoder),
    File(FileEncoder),
}

impl EncoderHandle {
    pub fn mock(d_vis: usize, seed: u64) -> Self {
        EncoderHandle::Mock(MockEncoder::new(d_vis, seed))
    }

    /// Parses `mock` or `file:<path>`.
    pub fn parse(spec: &str, d_vis: usize, seed: u64) -> Result<Self> {
        if spec == "mock" {
            Ok(Self::mock(d_vis, seed))
        } else if let Some(p) = spec.strip_prefix("file:") {
            let f = FileEncoder::open(Path::new(p))?;
            if f.dim != d_vis {
                return Err(Error::Shape(format!("feature file dim {} but d_vis {d_vis}", f.dim)));
            }
            Ok(EncoderHandle::File(f))
        } else {
            Err(Error::Config(format!("unknown encoder {spec:?}; expected mock or file:<path>")))
        }
    }

    pub fn name(&self) -> String {
        match self {
            EncoderHandle::Mock(m) => format!("mock(seed={})", m.seed),
            EncoderHandle::File(f) => format!("file:{}", f.path.display()),
        }
    }

    pub fn d_vis(&self) -> usize {
        match self {
            EncoderHandle::Mock(m) => m.d_vis,
            EncoderHandle::File(f) => f.dim,
        }
    }

    pub fn encode(&self, key: RegionKey, region: &RgbRegion) -> Result<FeatureVec> {
        match self {
            EncoderHandle::Mock(m) => m.encode(region),
            EncoderHandle::File(f) => f.encode(key),
        }
    }
}
