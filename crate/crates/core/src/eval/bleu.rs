//! BLEU with add-epsilon smoothing.
//!
//! Tokens are lowercase alphanumeric runs; a period between two digits stays
//! inside the token so "1.5" is one token. The n-gram order is capped by the
//! candidate length, zero match counts are replaced by 1e-9, and the brevity
//! penalty uses the closest reference length (shorter on ties).

use std::collections::HashMap;

const EPS: f64 = 1e-9;
const MAX_N: usize = 4;

pub fn tokenize(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut cur = String::new();
    for (i, &c) in chars.iter().enumerate() {
        let decimal_point = c == '.'
            && i > 0
            && chars[i - 1].is_ascii_digit()
            && chars.get(i + 1).is_some_and(|n| n.is_ascii_digit());
        if c.is_alphanumeric() || decimal_point {
            cur.extend(c.to_lowercase());
        } else if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut m = HashMap::new();
    if tokens.len() >= n {
        for g in tokens.windows(n) {
            *m.entry(g).or_insert(0) += 1;
        }
    }
    m
}

/// Clipped matches and candidate n-gram totals for orders 1..=4, plus the
/// closest reference length.
struct Stats {
    matches: [usize; MAX_N],
    totals: [usize; MAX_N],
    cand_len: usize,
    ref_len: usize,
}

fn stats(candidate: &[String], references: &[Vec<String>]) -> Stats {
    let mut matches = [0; MAX_N];
    let mut totals = [0; MAX_N];
    for n in 1..=MAX_N {
        let cand = ngram_counts(candidate, n);
        let mut max_ref: HashMap<&[String], usize> = HashMap::new();
        for r in references {
            for (g, c) in ngram_counts(r, n) {
                let e = max_ref.entry(g).or_insert(0);
                *e = (*e).max(c);
            }
        }
        matches[n - 1] = cand.iter().map(|(g, &c)| c.min(max_ref.get(g).copied().unwrap_or(0))).sum();
        totals[n - 1] = candidate.len().saturating_sub(n - 1);
    }
    let c = candidate.len();
    let ref_len = references
        .iter()
        .map(|r| r.len())
        .min_by_key(|&l| (l.abs_diff(c), l))
        .unwrap_or(0);
    Stats { matches, totals, cand_len: c, ref_len }
}

fn combine(matches: &[usize], totals: &[usize], order: usize, c: usize, r: usize) -> f64 {
    if order == 0 || c == 0 {
        return 0.0;
    }
    let log_p: f64 = (0..order)
        .map(|k| {
            let m = if matches[k] == 0 { EPS } else { matches[k] as f64 };
            (m / totals[k] as f64).ln()
        })
        .sum::<f64>()
        / order as f64;
    let bp = if c < r { (1.0 - r as f64 / c as f64).exp() } else { 1.0 };
    (bp * log_p.exp()).clamp(0.0, 1.0)
}

/// Sentence-level BLEU-4 of `candidate` against `references`.
pub fn bleu4(candidate: &str, references: &[&str]) -> f64 {
    let cand = tokenize(candidate);
    let refs: Vec<Vec<String>> = references.iter().map(|r| tokenize(r)).collect();
    let s = stats(&cand, &refs);
    combine(&s.matches, &s.totals, MAX_N.min(s.cand_len), s.cand_len, s.ref_len)
}

/// Corpus BLEU-4: counts and lengths are summed over segments before the
/// precisions and brevity penalty are formed.
pub fn corpus_bleu4(segments: &[(String, Vec<String>)]) -> f64 {
    let mut matches = [0usize; MAX_N];
    let mut totals = [0usize; MAX_N];
    let (mut c, mut r, mut longest) = (0, 0, 0);
    for (cand, refs) in segments {
        let cand = tokenize(cand);
        let refs: Vec<Vec<String>> = refs.iter().map(|x| tokenize(x)).collect();
        let s = stats(&cand, &refs);
        for k in 0..MAX_N {
            matches[k] += s.matches[k];
            totals[k] += s.totals[k];
        }
        c += s.cand_len;
        r += s.ref_len;
        longest = longest.max(s.cand_len);
    }
    combine(&matches, &totals, MAX_N.min(longest), c, r)
}
