//! Single-head scaled dot-product attention with f64 accumulation.
//!
//! Keys are visited in a canonical order that depends only on their values,
//! so permuting the key/value rows leaves every output bit unchanged.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::par;

pub type Rows = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionOutput {
    pub out: Rows,
    /// `weights[i][j]`: weight of key `j` for query `i`, in input order.
    pub weights: Rows,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn cmp_rows(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

fn canonical_order(k: &[Vec<f64>], v: &[Vec<f64>]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..k.len()).collect();
    idx.sort_by(|&a, &b| cmp_rows(&k[a], &k[b]).then_with(|| cmp_rows(&v[a], &v[b])));
    idx
}

fn check(q: &[Vec<f64>], k: &[Vec<f64>], v: &[Vec<f64>]) -> Result<()> {
    if k.is_empty() {
        return Err(Error::Empty("attention needs at least one key".into()));
    }
    if k.len() != v.len() {
        return Err(Error::Shape(format!("{} keys but {} values", k.len(), v.len())));
    }
    let dk = k[0].len();
    if q.iter().chain(k).any(|r| r.len() != dk) {
        return Err(Error::Shape("query and key widths differ".into()));
    }
    let dv = v[0].len();
    if v.iter().any(|r| r.len() != dv) {
        return Err(Error::Shape("ragged value rows".into()));
    }
    Ok(())
}

/// Softmax weights of one query over the keys listed in `order`.
fn row_weights(q: &[f64], k: &[Vec<f64>], order: &[usize], scale: f64) -> Result<Vec<f64>> {
    let mut logits = vec![0.0; k.len()];
    let mut max = f64::NEG_INFINITY;
    for &j in order {
        let l = dot(q, &k[j]) * scale;
        if !l.is_finite() {
            return Err(Error::Degenerate(format!("non-finite attention logit {l}")));
        }
        logits[j] = l;
        max = max.max(l);
    }
    let mut sum = 0.0;
    for &j in order {
        logits[j] = (logits[j] - max).exp();
        sum += logits[j];
    }
    for w in &mut logits {
        *w /= sum;
    }
    Ok(logits)
}

fn mix(w: &[f64], v: &[Vec<f64>], order: &[usize]) -> Vec<f64> {
    let mut out = vec![0.0; v[0].len()];
    for &j in order {
        for (o, x) in out.iter_mut().zip(&v[j]) {
            *o += w[j] * x;
        }
    }
    out
}

/// `softmax(Q·Kᵀ·scale)·V`, also returning the weight matrix.
pub fn attention_core(q: &[Vec<f64>], k: &[Vec<f64>], v: &[Vec<f64>], scale: f64) -> Result<AttentionOutput> {
    check(q, k, v)?;
    let order = canonical_order(k, v);
    let rows = par::try_map_range(q.len(), |i| {
        let w = row_weights(&q[i], k, &order, scale)?;
        let o = mix(&w, v, &order);
        Ok::<_, Error>((o, w))
    })?;
    let (out, weights) = rows.into_iter().unzip();
    Ok(AttentionOutput { out, weights })
}

/// Like [`attention_core`] without materializing the weight matrix.
pub fn attend(q: &[Vec<f64>], k: &[Vec<f64>], v: &[Vec<f64>], scale: f64) -> Result<Rows> {
    check(q, k, v)?;
    let order = canonical_order(k, v);
    par::try_map_range(q.len(), |i| Ok(mix(&row_weights(&q[i], k, &order, scale)?, v, &order)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_rows(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Rows {
        (0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
    }

    #[test]
    fn identical_keys_give_uniform_weights() {
        let k = vec![vec![0.3, -0.2]; 5];
        let v: Rows = (0..5).map(|i| vec![i as f64]).collect();
        let a = attention_core(&[vec![1.0, 2.0]], &k, &v, 1.0).unwrap();
        for w in &a.weights[0] {
            assert!((w - 0.2).abs() < 1e-15);
        }
        assert!((a.out[0][0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn saturated_logit_takes_all_weight() {
        let k = vec![vec![0.0], vec![50.0], vec![0.0]];
        let v = vec![vec![1.0], vec![2.0], vec![3.0]];
        let a = attention_core(&[vec![1.0]], &k, &v, 1.0).unwrap();
        assert!(a.weights[0][1] > 1.0 - 1e-12);
        assert!((a.out[0][0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn matches_hand_rolled_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (q, k, v) = (random_rows(&mut rng, 4, 8), random_rows(&mut rng, 6, 8), random_rows(&mut rng, 6, 5));
        let scale = 1.0 / 8f64.sqrt();
        let a = attention_core(&q, &k, &v, scale).unwrap();
        for i in 0..4 {
            let mut e = Vec::new();
            for j in 0..6 {
                let mut s = 0.0;
                for c in 0..8 {
                    s += q[i][c] * k[j][c];
                }
                e.push((s * scale).exp());
            }
            let z: f64 = e.iter().sum();
            let total: f64 = a.weights[i].iter().sum();
            assert!((total - 1.0).abs() < 1e-6);
            for c in 0..5 {
                let want: f64 = (0..6).map(|j| e[j] / z * v[j][c]).sum();
                assert!((a.out[i][c] - want).abs() < 1e-6);
            }
        }
        assert_eq!(attend(&q, &k, &v, scale).unwrap(), a.out);
    }

    #[test]
    fn key_permutation_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (q, k, v) = (random_rows(&mut rng, 3, 4), random_rows(&mut rng, 9, 4), random_rows(&mut rng, 9, 4));
        let base = attend(&q, &k, &v, 0.5).unwrap();
        let perm = [4, 2, 8, 0, 7, 1, 3, 6, 5];
        let kp: Rows = perm.iter().map(|&i| k[i].clone()).collect();
        let vp: Rows = perm.iter().map(|&i| v[i].clone()).collect();
        assert_eq!(attend(&q, &kp, &vp, 0.5).unwrap(), base);
    }

    #[test]
    fn errors() {
        assert!(matches!(attend(&[vec![1.0]], &[], &[], 1.0), Err(Error::Empty(_))));
        assert!(matches!(attend(&[vec![1.0]], &[vec![1.0]], &[], 1.0), Err(Error::Shape(_))));
        assert!(matches!(
            attend(&[vec![f64::INFINITY]], &[vec![1.0]], &[vec![1.0]], 1.0),
            Err(Error::Degenerate(_))
        ));
    }
}
