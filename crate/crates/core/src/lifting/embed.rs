use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Default instance embedding width.
pub const DEFAULT_D_INS: usize = 8;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-instance generator seed; independent of registry order.
pub fn instance_seed(seed: u64, id: u32) -> u64 {
    splitmix64(seed ^ splitmix64(id as u64))
}

/// `n` standard normal samples by Box-Muller.
pub fn standard_normals(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n + 1);
    while out.len() < n {
        // u1 in (0, 1] keeps ln finite
        let u1 = 1.0 - rng.random::<f64>();
        let u2 = rng.random::<f64>();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
        out.push(r * c);
        out.push(r * s);
    }
    out.truncate(n);
    out
}

/// Random identity codes, one per registry instance.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceEmbeddingTable {
    pub d_ins: usize,
    pub seed: u64,
    entries: BTreeMap<u32, Vec<f64>>,
}

impl InstanceEmbeddingTable {
    pub fn get(&self, id: u32) -> Option<&[f64]> {
        self.entries.get(&id).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &[f64])> {
        self.entries.iter().map(|(&k, v)| (k, v.as_slice()))
    }
}

pub fn instance_embedding_table(ids: &[u32], d_ins: usize, seed: u64) -> Result<InstanceEmbeddingTable> {
    if d_ins == 0 {
        return Err(Error::Config("d_ins must be >= 1".into()));
    }
    let entries = ids
        .iter()
        .map(|&id| (id, standard_normals(instance_seed(seed, id), d_ins)))
        .collect();
    Ok(InstanceEmbeddingTable { d_ins, seed, entries })
}
