//! Gradient-boosted regression trees on the logistic loss.
//!
//! Features are quantile-binned once; each tree is grown depth-first from
//! per-node gradient histograms (the larger child is derived by subtraction).
//! Splits maximize variance reduction of the gradient `p - y`; leaf values are
//! Newton steps `-Σg / (Σh + λ)`.

use serde::{Deserialize, Serialize};

use super::features::Dataset;
use crate::error::{Error, Result};
use crate::scalar::{sigmoid, Scalar};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GbdtConfig {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub shrinkage: f64,
    /// L2 penalty `λ` in the Newton leaf value.
    pub leaf_l2: f64,
    pub min_samples_leaf: usize,
    /// At most 256.
    pub max_bins: usize,
    pub seed: u64,
    pub workers: usize,
}

impl Default for GbdtConfig {
    fn default() -> Self {
        GbdtConfig {
            n_estimators: 500,
            max_depth: 4,
            shrinkage: 0.1,
            leaf_l2: 1.0,
            min_samples_leaf: 1,
            max_bins: 255,
            seed: 1,
            workers: 1,
        }
    }
}

impl GbdtConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::ConfigInvalid(m.to_string()));
        if self.max_depth == 0 {
            return bad("max_depth must be at least 1");
        }
        if !(self.shrinkage > 0.0 && self.shrinkage.is_finite()) {
            return bad("shrinkage must be positive");
        }
        if self.leaf_l2.is_nan() || self.leaf_l2 < 0.0 {
            return bad("leaf_l2 must be non-negative");
        }
        if !(2..=256).contains(&self.max_bins) {
            return bad("max_bins must be in 2..=256");
        }
        if self.min_samples_leaf == 0 || self.workers == 0 {
            return bad("min_samples_leaf and workers must be at least 1");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub enum Node<F: Scalar> {
    Leaf {
        value: F,
    },
    /// `x[feature] <= threshold` goes left.
    Split {
        feature: u32,
        threshold: F,
        left: u32,
        right: u32,
    },
}

/// Nodes in preorder; index 0 is the root.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Tree<F: Scalar> {
    pub nodes: Vec<Node<F>>,
}

impl<F: Scalar> Tree<F> {
    pub fn predict(&self, x: &[F]) -> F {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x[feature as usize] <= threshold { left } else { right } as usize;
                }
            }
        }
    }

    /// Number of split levels on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn walk<F: Scalar>(t: &Tree<F>, i: usize) -> usize {
            match t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(t, left as usize).max(walk(t, right as usize)),
            }
        }
        walk(self, 0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct GbdtModel<F: Scalar> {
    /// Prior log-odds of a break.
    pub base_score: F,
    pub shrinkage: F,
    pub max_depth: usize,
    pub n_estimators: usize,
    pub n_features: usize,
    pub trees: Vec<Tree<F>>,
}

impl<F: Scalar> GbdtModel<F> {
    pub fn raw_score(&self, x: &[F]) -> F {
        self.trees
            .iter()
            .fold(self.base_score, |acc, t| acc + self.shrinkage * t.predict(x))
    }

    pub fn probability(&self, x: &[F]) -> F {
        sigmoid(self.raw_score(x))
    }

    /// The model made of the first `n` trees; identical to training with
    /// `n_estimators = n`.
    pub fn truncated(&self, n: usize) -> Self {
        let n = n.min(self.trees.len());
        GbdtModel {
            trees: self.trees[..n].to_vec(),
            n_estimators: n,
            ..self.clone()
        }
    }
}

/// Per-feature ascending cut values; bin `k` holds `cuts[k-1] < x <= cuts[k]`.
struct Binner<F> {
    cuts: Vec<Vec<F>>,
}

impl<F: Scalar> Binner<F> {
    fn fit(data: &Dataset<F>, max_bins: usize) -> Self {
        let n = data.n_rows();
        let cuts = (0..data.n_features())
            .map(|f| {
                let mut vals: Vec<F> = (0..n).map(|r| data.row(r)[f]).collect();
                vals.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite features"));
                vals.dedup();
                if vals.len() <= max_bins {
                    return vals;
                }
                let mut cuts: Vec<F> = (1..=max_bins)
                    .map(|k| vals[(k * vals.len()).div_ceil(max_bins) - 1])
                    .collect();
                cuts.dedup();
                cuts
            })
            .collect();
        Binner { cuts }
    }

    fn bin(&self, f: usize, x: F) -> u8 {
        let c = &self.cuts[f];
        c.partition_point(|&v| v < x).min(c.len() - 1) as u8
    }
}

#[derive(Clone, Copy, Default)]
struct Bin {
    g: f64,
    h: f64,
    n: u32,
}

const SLOTS: usize = 256;

struct Grower<'a, F> {
    bins: &'a [u8],
    n_features: usize,
    n_bins: Vec<usize>,
    cuts: &'a [Vec<F>],
    grad: &'a [f64],
    hess: &'a [f64],
    config: &'a GbdtConfig,
    pool: Option<&'a rayon::ThreadPool>,
}

struct BestSplit {
    gain: f64,
    feature: usize,
    bin: usize,
}

impl<F: Scalar> Grower<'_, F> {
    fn histogram(&self, rows: &[u32]) -> Vec<Bin> {
        let nf = self.n_features;
        let fill = |lo: usize, hi: usize, hist: &mut [Bin]| {
            for &r in rows {
                let r = r as usize;
                let (g, h) = (self.grad[r], self.hess[r]);
                let row = &self.bins[r * nf + lo..r * nf + hi];
                for (k, &b) in row.iter().enumerate() {
                    let slot = &mut hist[k * SLOTS + b as usize];
                    slot.g += g;
                    slot.h += h;
                    slot.n += 1;
                }
            }
        };
        let mut hist = vec![Bin::default(); nf * SLOTS];
        match self.pool {
            Some(pool) if rows.len() > 2048 => {
                use rayon::prelude::*;
                let per = nf.div_ceil(pool.current_num_threads()).max(1);
                pool.install(|| {
                    hist.par_chunks_mut(per * SLOTS).enumerate().for_each(|(c, chunk)| {
                        let lo = c * per;
                        fill(lo, (lo + per).min(nf), chunk);
                    })
                });
            }
            _ => fill(0, nf, &mut hist),
        }
        hist
    }

    fn best_split(&self, hist: &[Bin], total: Bin) -> Option<BestSplit> {
        let min_leaf = self.config.min_samples_leaf as u32;
        let parent = total.g * total.g / total.n as f64;
        let mut best: Option<BestSplit> = None;
        for f in 0..self.n_features {
            let fh = &hist[f * SLOTS..f * SLOTS + self.n_bins[f]];
            let mut left = Bin::default();
            for (b, slot) in fh.iter().enumerate().take(self.n_bins[f].saturating_sub(1)) {
                left.g += slot.g;
                left.n += slot.n;
                let rn = total.n - left.n;
                if left.n < min_leaf || rn < min_leaf || slot.n == 0 {
                    continue;
                }
                let rg = total.g - left.g;
                let gain = left.g * left.g / left.n as f64 + rg * rg / rn as f64 - parent;
                if gain > best.as_ref().map_or(1e-12, |s| s.gain) {
                    best = Some(BestSplit {
                        gain,
                        feature: f,
                        bin: b,
                    });
                }
            }
        }
        best
    }

    fn leaf(&self, total: Bin) -> Node<F> {
        Node::Leaf {
            value: F::of(-total.g / (total.h + self.config.leaf_l2)),
        }
    }

    fn grow(&self, rows: &mut [u32], hist: Vec<Bin>, depth: usize, nodes: &mut Vec<Node<F>>) {
        let total = hist[..self.n_bins[0]].iter().fold(Bin::default(), |a, b| Bin {
            g: a.g + b.g,
            h: a.h + b.h,
            n: a.n + b.n,
        });
        let me = nodes.len();
        nodes.push(self.leaf(total));
        if depth >= self.config.max_depth || rows.len() < 2 * self.config.min_samples_leaf {
            return;
        }
        let Some(split) = self.best_split(&hist, total) else {
            return;
        };
        let nf = self.n_features;
        let mut mid = 0;
        for i in 0..rows.len() {
            if (self.bins[rows[i] as usize * nf + split.feature] as usize) <= split.bin {
                rows.swap(i, mid);
                mid += 1;
            }
        }
        let (left_rows, right_rows) = rows.split_at_mut(mid);
        let small_is_left = left_rows.len() <= right_rows.len();
        let small = self.histogram(if small_is_left { left_rows } else { right_rows });
        let mut large = hist;
        for (l, s) in large.iter_mut().zip(&small) {
            l.g -= s.g;
            l.h -= s.h;
            l.n -= s.n;
        }
        let (left_hist, right_hist) = if small_is_left { (small, large) } else { (large, small) };

        let left = nodes.len();
        self.grow(left_rows, left_hist, depth + 1, nodes);
        let right = nodes.len();
        self.grow(right_rows, right_hist, depth + 1, nodes);
        nodes[me] = Node::Split {
            feature: split.feature as u32,
            threshold: self.cuts[split.feature][split.bin],
            left: left as u32,
            right: right as u32,
        };
    }
}

fn log_loss(scores: &[f64], labels: &[bool]) -> f64 {
    let total: f64 = scores
        .iter()
        .zip(labels)
        .map(|(&z, &y)| {
            let m = if y { z } else { -z };
            // -ln σ(m)
            if m >= 0.0 {
                (-m).exp().ln_1p()
            } else {
                m.exp().ln_1p() - m
            }
        })
        .sum();
    total / scores.len() as f64
}

/// Trains a boosted ensemble; also returns the mean training log-loss before
/// the first tree and after each tree.
pub fn train_gbdt_with_history<F: Scalar>(data: &Dataset<F>, config: &GbdtConfig) -> Result<(GbdtModel<F>, Vec<f64>)> {
    config.validate()?;
    data.require_both_classes()?;
    let n = data.n_rows();
    let nf = data.n_features();
    if nf == 0 {
        return Err(Error::ConfigInvalid("features are empty".into()));
    }
    let pos = data.positive_count() as f64;
    let base = (pos / (n as f64 - pos)).ln();

    let binner = Binner::fit(data, config.max_bins);
    let mut bins = vec![0u8; n * nf];
    for r in 0..n {
        let x = data.row(r);
        for f in 0..nf {
            bins[r * nf + f] = binner.bin(f, x[f]);
        }
    }
    let pool = if config.workers > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(config.workers)
                .build()
                .map_err(|e| Error::ConfigInvalid(e.to_string()))?,
        )
    } else {
        None
    };

    let labels = data.labels();
    let mut scores = vec![base; n];
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let mut history = vec![log_loss(&scores, labels)];
    let shrinkage = F::of(config.shrinkage);
    let mut trees = Vec::with_capacity(config.n_estimators);
    let mut all_rows: Vec<u32> = (0..n as u32).collect();

    for _ in 0..config.n_estimators {
        for i in 0..n {
            let p = sigmoid(scores[i]);
            grad[i] = p - if labels[i] { 1.0 } else { 0.0 };
            hess[i] = p * (1.0 - p);
        }
        let grower = Grower {
            bins: &bins,
            n_features: nf,
            n_bins: binner.cuts.iter().map(Vec::len).collect(),
            cuts: &binner.cuts,
            grad: &grad,
            hess: &hess,
            config,
            pool: pool.as_ref(),
        };
        all_rows.sort_unstable();
        let root_hist = grower.histogram(&all_rows);
        let mut nodes = Vec::new();
        grower.grow(&mut all_rows, root_hist, 0, &mut nodes);
        let tree = Tree { nodes };
        for (r, s) in scores.iter_mut().enumerate() {
            *s += (shrinkage * tree.predict(data.row(r))).as_f64();
        }
        history.push(log_loss(&scores, labels));
        trees.push(tree);
    }

    Ok((
        GbdtModel {
            base_score: F::of(base),
            shrinkage,
            max_depth: config.max_depth,
            n_estimators: config.n_estimators,
            n_features: nf,
            trees,
        },
        history,
    ))
}

pub fn train_gbdt<F: Scalar>(data: &Dataset<F>, config: &GbdtConfig) -> Result<GbdtModel<F>> {
    train_gbdt_with_history(data, config).map(|(m, _)| m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn xor(n: usize, seed: u64) -> Dataset<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ds = Dataset::new(2);
        for _ in 0..n {
            let x = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            ds.push_row(&x, (x[0] > 0.0) ^ (x[1] > 0.0)).unwrap();
            ds.end_group();
        }
        ds
    }

    fn accuracy(m: &GbdtModel<f64>, ds: &Dataset<f64>) -> f64 {
        let ok = (0..ds.n_rows())
            .filter(|&i| (m.probability(ds.row(i)) >= 0.5) == ds.label(i))
            .count();
        ok as f64 / ds.n_rows() as f64
    }

    fn cfg(depth: usize, trees: usize) -> GbdtConfig {
        GbdtConfig {
            n_estimators: trees,
            max_depth: depth,
            shrinkage: 0.3,
            ..GbdtConfig::default()
        }
    }

    #[test]
    fn xor_needs_depth_two() {
        let ds = xor(400, 5);
        let deep = train_gbdt(&ds, &cfg(2, 100)).unwrap();
        assert!(accuracy(&deep, &ds) >= 0.99);
        let stumps = train_gbdt(&ds, &cfg(1, 100)).unwrap();
        assert!(accuracy(&stumps, &ds) <= 0.80);
    }

    #[test]
    fn loss_never_increases() {
        let ds = xor(300, 8);
        let (_, hist) = train_gbdt_with_history(&ds, &cfg(3, 60)).unwrap();
        for w in hist.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{w:?}");
        }
    }

    #[test]
    fn zero_trees_predict_prior() {
        let mut ds = Dataset::new(1);
        for i in 0..10 {
            ds.push_row(&[i as f64], i < 5).unwrap();
        }
        let m = train_gbdt(&ds, &cfg(3, 0)).unwrap();
        assert!(m.trees.is_empty());
        assert!((m.probability(&[3.0]) - 0.5).abs() < 1e-15);

        let mut ds = Dataset::new(1);
        for i in 0..10 {
            ds.push_row(&[i as f64], i < 3).unwrap();
        }
        let m = train_gbdt(&ds, &cfg(3, 0)).unwrap();
        assert!((m.probability(&[100.0]) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn trees_respect_depth_and_count() {
        let ds = xor(200, 1);
        for depth in 1..=4 {
            let m = train_gbdt(&ds, &cfg(depth, 7)).unwrap();
            assert_eq!(m.trees.len(), 7);
            assert!(m.trees.iter().all(|t| t.depth() <= depth));
        }
    }

    #[test]
    fn workers_do_not_change_the_model() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut ds = Dataset::new(12);
        for _ in 0..5000 {
            let x: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
            let y = x[0] * x[3] + x[7] > 0.1;
            ds.push_row(&x, y).unwrap();
        }
        let serial = train_gbdt(&ds, &cfg(4, 5)).unwrap();
        let parallel = train_gbdt(
            &ds,
            &GbdtConfig {
                workers: 4,
                ..cfg(4, 5)
            },
        )
        .unwrap();
        assert_eq!(serial, parallel);
    }

    #[test]
    fn truncation_matches_shorter_training() {
        let ds = xor(200, 2);
        let long = train_gbdt(&ds, &cfg(2, 30)).unwrap();
        let short = train_gbdt(&ds, &cfg(2, 12)).unwrap();
        assert_eq!(long.truncated(12), short);
    }

    #[test]
    fn degenerate_labels_rejected() {
        let mut ds = Dataset::new(1);
        ds.push_row(&[1.0f64], false).unwrap();
        ds.push_row(&[2.0], false).unwrap();
        assert!(matches!(train_gbdt(&ds, &cfg(2, 3)), Err(Error::DegenerateLabels)));
    }

    #[test]
    fn binning_caps_distinct_values() {
        let mut ds = Dataset::new(1);
        for i in 0..1000 {
            ds.push_row(&[i as f64], i % 2 == 0).unwrap();
        }
        let b = Binner::fit(&ds, 16);
        assert!(b.cuts[0].len() <= 16);
        assert_eq!(*b.cuts[0].last().unwrap(), 999.0);
        assert_eq!(b.bin(0, 0.0), 0);
        assert_eq!(b.bin(0, 5000.0) as usize, b.cuts[0].len() - 1);
    }
}
