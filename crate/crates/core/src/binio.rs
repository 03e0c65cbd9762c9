//! Little-endian binary helpers shared by all `D4D?` file formats.
//!
//! Every format starts with a 4-byte ASCII magic. Readers slurp the whole file
//! and decode from memory so truncation is reported with the field that ran
//! out rather than as a bare EOF.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use byteorder::{ByteOrder, LittleEndian, WriteBytesExt};

use crate::error::{Error, Result};

pub const MAGIC_DEPTH: &[u8; 4] = b"D4DD";
pub const MAGIC_MASK: &[u8; 4] = b"D4DM";
pub const MAGIC_FEATURES: &[u8; 4] = b"D4DF";
pub const MAGIC_POINTS: &[u8; 4] = b"D4DP";
pub const MAGIC_VOXELS: &[u8; 4] = b"D4DV";
pub const MAGIC_TOKENS: &[u8; 4] = b"D4DT";
pub const MAGIC_WEIGHTS: &[u8; 4] = b"D4DW";

pub struct Reader<'a> {
    path: PathBuf,
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(path: impl Into<PathBuf>, data: &'a [u8]) -> Self {
        Reader {
            path: path.into(),
            data,
            pos: 0,
        }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.data.len());
        match end {
            Some(end) => {
                let s = &self.data[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::Truncated {
                path: self.path.clone(),
                what: what.to_string(),
            }),
        }
    }

    pub fn magic(&mut self, expected: &[u8; 4]) -> Result<()> {
        let found = self.take(4, "magic")?;
        if found != expected {
            return Err(Error::BadMagic {
                path: self.path.clone(),
                expected: String::from_utf8_lossy(expected).into_owned(),
                found: String::from_utf8_lossy(found).into_owned(),
            });
        }
        Ok(())
    }

    pub fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(LittleEndian::read_u32(self.take(4, what)?))
    }

    pub fn f32(&mut self, what: &str) -> Result<f32> {
        Ok(LittleEndian::read_f32(self.take(4, what)?))
    }

    pub fn bytes(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        self.take(n, what)
    }

    pub fn f32_into(&mut self, out: &mut Vec<f32>, n: usize, what: &str) -> Result<()> {
        let b = self.take(n.checked_mul(4).unwrap_or(usize::MAX), what)?;
        out.extend(b.chunks_exact(4).map(LittleEndian::read_f32));
        Ok(())
    }

    pub fn f32_vec(&mut self, n: usize, what: &str) -> Result<Vec<f32>> {
        let mut v = Vec::with_capacity(n.min(1 << 24));
        self.f32_into(&mut v, n, what)?;
        Ok(v)
    }

    pub fn u32_vec(&mut self, n: usize, what: &str) -> Result<Vec<u32>> {
        let b = self.take(n.checked_mul(4).unwrap_or(usize::MAX), what)?;
        Ok(b.chunks_exact(4).map(LittleEndian::read_u32).collect())
    }

    pub fn remaining(&self) -> usize {
        self.data.len() - self.pos
    }

    /// Errors if bytes are left over after the declared payload.
    pub fn finish(&self) -> Result<()> {
        if self.remaining() != 0 {
            return Err(Error::format(
                &self.path,
                format!("{} trailing bytes after payload", self.remaining()),
            ));
        }
        Ok(())
    }
}

#[derive(Default)]
pub struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new(magic: &[u8; 4]) -> Self {
        let mut w = Writer::default();
        w.buf.extend_from_slice(magic);
        w
    }

    pub fn u32(&mut self, v: u32) -> &mut Self {
        self.buf.write_u32::<LittleEndian>(v).expect("vec write");
        self
    }

    pub fn f32(&mut self, v: f32) -> &mut Self {
        self.buf.write_f32::<LittleEndian>(v).expect("vec write");
        self
    }

    pub fn f32s(&mut self, vs: impl IntoIterator<Item = f32>) -> &mut Self {
        for v in vs {
            self.f32(v);
        }
        self
    }

    pub fn u32s(&mut self, vs: impl IntoIterator<Item = u32>) -> &mut Self {
        for v in vs {
            self.u32(v);
        }
        self
    }

    pub fn bytes(&mut self, b: &[u8]) -> &mut Self {
        self.buf.extend_from_slice(b);
        self
    }

    pub fn into_inner(self) -> Vec<u8> {
        self.buf
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        write_file(path, &self.buf)
    }
}

pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn write_file(path: &Path, data: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(data).map_err(|e| Error::io(path, e))
}

pub fn to_u32(n: usize, path: &Path, what: &str) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::format(path, format!("{what} {n} exceeds u32")))
}

/// Writes serializable rows as JSON lines.
pub fn write_jsonl<T: serde::Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut out = Vec::new();
    for row in rows {
        serde_json::to_writer(&mut out, &row).map_err(|e| Error::json(path.display().to_string(), e))?;
        out.push(b'\n');
    }
    write_file(path, &out)
}

/// Reads JSON lines, skipping blank lines; errors carry the line number.
pub fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::json(format!("{}:{}", path.display(), i + 1), e))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncation_names_field() {
        let mut w = Writer::new(MAGIC_DEPTH);
        w.u32(3);
        let data = w.into_inner();
        let mut r = Reader::new("x.d4d", &data);
        r.magic(MAGIC_DEPTH).unwrap();
        assert_eq!(r.u32("width").unwrap(), 3);
        match r.u32("height") {
            Err(Error::Truncated { what, .. }) => assert_eq!(what, "height"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn wrong_magic() {
        let data = b"D4DXrest".to_vec();
        let mut r = Reader::new("depth_000000.d4d", &data);
        let err = r.magic(MAGIC_DEPTH).unwrap_err();
        assert!(err.to_string().contains("depth_000000.d4d"));
    }
}
