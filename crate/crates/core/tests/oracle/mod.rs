//! Reference computations for the integration and acceptance tests. Each one
//! re-derives a quantity the slow, obvious way without calling the code it
//! checks.
#![allow(dead_code)]

use std::collections::HashMap;

use qseg_core::corpus::tokenize;
use qseg_core::{Dataset64, NGramTable, QueryTokens, Segmentation};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_breaks(rng: &mut ChaCha8Rng, n: usize) -> Vec<bool> {
    (0..n).map(|_| rng.random_bool(0.5)).collect()
}

/// `count` (gold, predicted) pairs over queries of 1..=max_tokens tokens.
/// Predictions copy gold with some probability so exact matches occur.
pub fn random_pairs(rng: &mut ChaCha8Rng, count: usize, max_tokens: usize) -> Vec<(Segmentation, Segmentation)> {
    (0..count)
        .map(|_| {
            let b = rng.random_range(1..=max_tokens) - 1;
            let gold = random_breaks(rng, b);
            let pred = if rng.random_bool(0.3) {
                gold.clone()
            } else {
                random_breaks(rng, b)
            };
            (Segmentation::new(gold), Segmentation::new(pred))
        })
        .collect()
}

/// (correct decisions, total decisions, exactly matching queries).
pub fn recount(pairs: &[(Segmentation, Segmentation)]) -> (usize, usize, usize) {
    let (mut correct, mut total, mut exact) = (0, 0, 0);
    for (g, p) in pairs {
        let (g, p) = (g.breaks(), p.breaks());
        let mut all = true;
        for i in 0..g.len() {
            total += 1;
            if g[i] == p[i] {
                correct += 1;
            } else {
                all = false;
            }
        }
        if all {
            exact += 1;
        }
    }
    (correct, total, exact)
}

/// Break vector of bitmask `m`: bit i set means a break after token i.
pub fn mask_breaks(m: u64, gaps: usize) -> Vec<bool> {
    (0..gaps).map(|i| m >> i & 1 == 1).collect()
}

/// Score of one candidate, or `None` when it uses an unseen multi-token segment.
pub fn reference_score(
    tokens: &[String],
    breaks: &[bool],
    counts: &HashMap<Vec<String>, u64>,
    pow: bool,
) -> Option<u64> {
    let mut score = 0u64;
    let mut start = 0;
    for end in 1..=tokens.len() {
        if end == tokens.len() || breaks[end - 1] {
            let seg = &tokens[start..end];
            if seg.len() > 1 {
                let f = *counts.get(seg)?;
                if f == 0 {
                    return None;
                }
                let len = seg.len() as u64;
                score += if pow { len.pow(len as u32) } else { 1 } * f;
            }
            start = end;
        }
    }
    Some(score)
}

/// Highest score; ties to fewer breaks, then the lexicographically smallest
/// break vector (`false < true`).
pub fn reference_naive(tokens: &[String], counts: &HashMap<Vec<String>, u64>, pow: bool) -> Vec<bool> {
    let gaps = tokens.len() - 1;
    let mut best: Option<(u64, Vec<bool>)> = None;
    for m in 0..1u64 << gaps {
        let b = mask_breaks(m, gaps);
        let Some(s) = reference_score(tokens, &b, counts, pow) else {
            continue;
        };
        let better = match &best {
            None => true,
            Some((bs, bb)) => {
                let nb = b.iter().filter(|&&x| x).count();
                let nbb = bb.iter().filter(|&&x| x).count();
                s > *bs || (s == *bs && (nb < nbb || (nb == nbb && b < *bb)))
            }
        };
        if better {
            best = Some((s, b));
        }
    }
    best.expect("the all-break candidate is always valid").1
}

/// Random query over a tiny alphabet plus an n-gram table holding some of its
/// sub-spans and some unrelated n-grams.
pub fn random_ngram_case(
    rng: &mut ChaCha8Rng,
    max_tokens: usize,
) -> (QueryTokens, NGramTable, HashMap<Vec<String>, u64>) {
    const ALPHABET: [&str; 4] = ["p", "q", "r", "s"];
    let n = rng.random_range(1..=max_tokens);
    let words: Vec<String> = (0..n).map(|_| ALPHABET[rng.random_range(0..4)].to_string()).collect();
    let max_n = rng.random_range(2..=6);
    let mut counts: HashMap<Vec<String>, u64> = HashMap::new();
    for a in 0..n {
        for b in a + 2..=n.min(a + max_n) {
            if rng.random_bool(0.4) {
                counts.insert(words[a..b].to_vec(), rng.random_range(1..50));
            }
        }
    }
    for _ in 0..5 {
        let len = rng.random_range(2..=max_n);
        let g: Vec<String> = (0..len).map(|_| ALPHABET[rng.random_range(0..4)].to_string()).collect();
        counts.insert(g, rng.random_range(1..50));
    }
    let mut table = NGramTable::new(max_n).unwrap();
    for (k, &v) in &counts {
        table.insert(k.clone(), v).unwrap();
    }
    (QueryTokens::new(words).unwrap(), table, counts)
}

pub fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `‖a - b‖ / max(‖a‖, ‖b‖)` (0 when both vanish).
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

pub fn uniform_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| (rng.random::<f64>() - 0.5) * 2.0 * scale).collect()
}

/// Two uniform features in (-1, 1); the label is their sign XOR.
pub fn xor_dataset(n: usize, seed: u64) -> Dataset64 {
    let mut r = rng(seed);
    let mut ds = Dataset64::new(2);
    for _ in 0..n {
        let x = [r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)];
        ds.push_row(&x, (x[0] > 0.0) != (x[1] > 0.0)).unwrap();
    }
    ds
}

/// `x` and `y` always co-occur; `z` appears only in queries without them.
pub fn planted_corpus() -> Vec<QueryTokens> {
    (0..300)
        .flat_map(|i| [format!("x y a{}", i % 10), format!("b{} z b{}", i % 10, (i + 3) % 10)])
        .map(|l| tokenize(&l).unwrap())
        .collect()
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}
