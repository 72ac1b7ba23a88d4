//! Word embeddings: skip-gram and CBOW training with negative sampling, and
//! word2vec/GloVe text-format vector files.
//!
//! Each query is an independent sentence, so context windows never cross
//! query boundaries. Multi-worker training shares the parameter matrices
//! without locks (relaxed atomic loads and stores, last write wins); with a
//! single worker the result is bit-deterministic for a given seed.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::QueryTokens;
use crate::error::{Error, Result};
use crate::scalar::{dot, log_sigmoid, sigmoid, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Architecture {
    SkipGram,
    Cbow,
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Architecture::SkipGram => "skip-gram",
            Architecture::Cbow => "cbow",
        })
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "skip-gram" | "skipgram" | "sg" => Ok(Architecture::SkipGram),
            "cbow" => Ok(Architecture::Cbow),
            _ => Err(Error::ConfigInvalid(format!("unknown architecture {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbedTrainConfig {
    pub architecture: Architecture,
    pub dimension: usize,
    /// Maximum distance between center and context token.
    pub window: usize,
    pub negative_samples: usize,
    pub epochs: usize,
    pub initial_learning_rate: f64,
    pub min_count: u64,
    /// Frequent-token downsampling threshold; 0 disables it.
    pub subsample_threshold: f64,
    pub seed: u64,
    pub workers: usize,
}

impl EmbedTrainConfig {
    /// Defaults for `architecture`, with its conventional starting rate.
    pub fn new(architecture: Architecture) -> Self {
        EmbedTrainConfig {
            architecture,
            dimension: 300,
            window: 3,
            negative_samples: 5,
            epochs: 5,
            initial_learning_rate: match architecture {
                Architecture::SkipGram => 0.025,
                Architecture::Cbow => 0.05,
            },
            min_count: 5,
            subsample_threshold: 1e-3,
            seed: 1,
            workers: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::ConfigInvalid(m.to_string()));
        if self.dimension == 0 {
            return bad("dimension must be at least 1");
        }
        if self.window == 0 {
            return bad("window must be at least 1");
        }
        if self.negative_samples == 0 {
            return bad("negative_samples must be at least 1");
        }
        if !(self.initial_learning_rate > 0.0 && self.initial_learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if self.subsample_threshold.is_nan() || self.subsample_threshold < 0.0 {
            return bad("subsample threshold must be non-negative");
        }
        if self.workers == 0 {
            return bad("workers must be at least 1");
        }
        Ok(())
    }
}

impl Default for EmbedTrainConfig {
    fn default() -> Self {
        EmbedTrainConfig::new(Architecture::Cbow)
    }
}

/// Token inventory with dense indices and corpus counts.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    counts: Vec<u64>,
}

impl Vocab {
    fn push(&mut self, token: String, count: u64) -> bool {
        if self.index.contains_key(&token) {
            return false;
        }
        self.index.insert(token.clone(), self.tokens.len());
        self.tokens.push(token);
        self.counts.push(count);
        true
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, index: usize) -> &str {
        &self.tokens[index]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn count(&self, token: &str) -> u64 {
        self.index_of(token).map_or(0, |i| self.counts[i])
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Counts tokens and keeps those seen at least `min_count` times, ordered by
/// descending count then token.
pub fn build_vocab<'a, I>(corpus: I, min_count: u64) -> Result<Vocab>
where
    I: IntoIterator<Item = &'a QueryTokens>,
{
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for q in corpus {
        for t in q.tokens() {
            *counts.entry(t.as_str()).or_insert(0) += 1;
        }
    }
    let mut kept: Vec<(&str, u64)> = counts.into_iter().filter(|&(_, c)| c >= min_count).collect();
    if kept.is_empty() {
        return Err(Error::EmptyVocab);
    }
    kept.sort_unstable_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    let mut vocab = Vocab::default();
    for (t, c) in kept {
        vocab.push(t.to_string(), c);
    }
    Ok(vocab)
}

/// Vocabulary-indexed matrix of `dimension`-wide vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable<F: Scalar> {
    dimension: usize,
    vocab: Vocab,
    input: Vec<F>,
    output: Option<Vec<F>>,
}

impl<F: Scalar> EmbeddingTable<F> {
    /// Training initialization: input rows uniform in `±0.5/D`, output rows zero.
    pub fn random_init(vocab: Vocab, dimension: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let half = 0.5 / dimension as f64;
        let input = (0..vocab.len() * dimension)
            .map(|_| F::of(rng.random_range(-half..half)))
            .collect();
        let output = Some(vec![F::zero(); vocab.len() * dimension]);
        EmbeddingTable {
            dimension,
            vocab,
            input,
            output,
        }
    }

    /// Builds a table from `(token, vector)` rows; later duplicates of a token are ignored.
    pub fn from_rows<I>(dimension: usize, rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, Vec<F>)>,
    {
        let mut vocab = Vocab::default();
        let mut input = Vec::new();
        for (i, (token, v)) in rows.into_iter().enumerate() {
            if v.len() != dimension {
                return Err(Error::DimensionMismatch {
                    line: i + 1,
                    expected: dimension,
                    found: v.len(),
                });
            }
            if vocab.push(token, 0) {
                input.extend(v);
            }
        }
        Ok(EmbeddingTable {
            dimension,
            vocab,
            input,
            output: None,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn row(&self, index: usize) -> &[F] {
        &self.input[index * self.dimension..(index + 1) * self.dimension]
    }

    /// Context (output) vectors, present only on freshly trained tables.
    pub fn output_row(&self, index: usize) -> Option<&[F]> {
        self.output
            .as_ref()
            .map(|o| &o[index * self.dimension..(index + 1) * self.dimension])
    }

    pub fn get(&self, token: &str) -> Option<&[F]> {
        self.vocab.index_of(token).map(|i| self.row(i))
    }

    /// Stored vector, or the zero vector for out-of-vocabulary tokens.
    pub fn lookup(&self, token: &str) -> Vec<F> {
        match self.get(token) {
            Some(v) => v.to_vec(),
            None => vec![F::zero(); self.dimension],
        }
    }

    /// Appends the lookup of `token` to `out` without allocating.
    pub fn extend_with(&self, token: &str, out: &mut Vec<F>) {
        match self.get(token) {
            Some(v) => out.extend_from_slice(v),
            None => out.extend(std::iter::repeat_n(F::zero(), self.dimension)),
        }
    }

    pub fn drop_output(&mut self) {
        self.output = None;
    }

    /// Writes the headered text format: `count dim`, then `token v1 .. vD` per row.
    pub fn write_vectors<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {}", self.len(), self.dimension)?;
        for (i, token) in self.vocab.tokens.iter().enumerate() {
            w.write_all(token.as_bytes())?;
            for x in self.row(i) {
                write!(w, " {x:?}")?;
            }
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Parses word2vec-text or GloVe-text vectors. A first line made of exactly
    /// two integers is taken as the `count dim` header.
    pub fn read_vectors<R: BufRead>(reader: R) -> Result<Self> {
        let mut dimension: Option<usize> = None;
        let mut declared: Option<usize> = None;
        let mut rows = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let lineno = i + 1;
            let line = line?;
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(' ').filter(|f| !f.is_empty()).collect();
            if lineno == 1 && fields.len() == 2 {
                if let (Ok(n), Ok(d)) = (fields[0].parse::<usize>(), fields[1].parse::<usize>()) {
                    if d == 0 {
                        return Err(Error::parse(1, "header declares dimension 0"));
                    }
                    declared = Some(n);
                    dimension = Some(d);
                    continue;
                }
            }
            if fields.len() < 2 {
                return Err(Error::parse(lineno, "expected a token followed by values"));
            }
            let found = fields.len() - 1;
            let dim = *dimension.get_or_insert(found);
            if found != dim {
                return Err(Error::DimensionMismatch {
                    line: lineno,
                    expected: dim,
                    found,
                });
            }
            let vector = fields[1..]
                .iter()
                .map(|f| match f.parse::<F>() {
                    Ok(x) if x.is_finite() => Ok(x),
                    _ => Err(Error::parse(lineno, format!("invalid value {f:?}"))),
                })
                .collect::<Result<Vec<F>>>()?;
            rows.push((fields[0].to_string(), vector));
        }
        let dim = dimension.ok_or_else(|| Error::parse(1, "no vectors in file"))?;
        if let Some(n) = declared {
            if n != rows.len() {
                return Err(Error::parse(
                    1,
                    format!("header declares {n} vectors, file has {}", rows.len()),
                ));
            }
        }
        Self::from_rows(dim, rows)
    }

    /// Writes the vector file plus a JSON sidecar (`<path>.json`) holding the
    /// training configuration and token counts.
    pub fn save(&self, path: &Path, config: Option<&EmbedTrainConfig>) -> Result<()> {
        self.write_vectors(BufWriter::new(File::create(path)?))?;
        let meta = EmbeddingMeta {
            format: SIDECAR_FORMAT.to_string(),
            scalar: F::NAME.to_string(),
            dimension: self.dimension,
            config: config.cloned(),
            counts: self
                .vocab
                .tokens
                .iter()
                .cloned()
                .zip(self.vocab.counts.iter().copied())
                .collect(),
        };
        let mut w = BufWriter::new(File::create(sidecar_path(path))?);
        serde_json::to_writer_pretty(&mut w, &meta)?;
        w.write_all(b"\n")?;
        Ok(())
    }
}

const SIDECAR_FORMAT: &str = "qseg-embeddings-v1";

/// Provenance stored next to a vector file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingMeta {
    pub format: String,
    pub scalar: String,
    pub dimension: usize,
    pub config: Option<EmbedTrainConfig>,
    pub counts: BTreeMap<String, u64>,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Loads a vector file; token counts are restored from the sidecar when one exists.
pub fn load_vectors<F: Scalar>(path: &Path) -> Result<EmbeddingTable<F>> {
    let mut table = EmbeddingTable::read_vectors(BufReader::new(File::open(path)?))?;
    let sidecar = sidecar_path(path);
    if sidecar.exists() {
        let meta: EmbeddingMeta = serde_json::from_reader(BufReader::new(File::open(&sidecar)?))?;
        for (i, t) in table.vocab.tokens.iter().enumerate() {
            table.vocab.counts[i] = meta.counts.get(t).copied().unwrap_or(0);
        }
    }
    Ok(table)
}

/// Negated negative-sampling objective for one example:
/// `-ln σ(u_c·v) - Σ ln σ(-u_n·v)`.
pub fn ns_loss<F: Scalar>(center: &[F], context: &[F], negatives: &[&[F]]) -> F {
    let pos = -log_sigmoid(dot(context, center));
    negatives.iter().fold(pos, |acc, u| acc - log_sigmoid(-dot(u, center)))
}

/// Gradients of [`ns_loss`] with respect to each vector it touches.
#[derive(Clone, Debug, PartialEq)]
pub struct NsGradients<F> {
    pub center: Vec<F>,
    pub context: Vec<F>,
    pub negatives: Vec<Vec<F>>,
}

/// `∂loss/∂(u·v) = σ(u·v) - label` for one output vector.
#[inline]
fn score_gradient<F: Scalar>(u: &[F], v: &[F], label: F) -> F {
    sigmoid(dot(u, v)) - label
}

pub fn ns_gradients<F: Scalar>(center: &[F], context: &[F], negatives: &[&[F]]) -> NsGradients<F> {
    let mut g_center = vec![F::zero(); center.len()];
    let mut push = |u: &[F], label: F| {
        let g = score_gradient(u, center, label);
        for (gc, &x) in g_center.iter_mut().zip(u) {
            *gc = *gc + g * x;
        }
        center.iter().map(|&x| g * x).collect::<Vec<F>>()
    };
    let g_context = push(context, F::one());
    let g_negatives = negatives.iter().map(|u| push(u, F::zero())).collect();
    NsGradients {
        center: g_center,
        context: g_context,
        negatives: g_negatives,
    }
}

/// Token positions within `span` of `pos`, clipped to the query, excluding `pos`.
pub fn context_positions(pos: usize, len: usize, span: usize) -> impl Iterator<Item = usize> {
    let r: Range<usize> = pos.saturating_sub(span)..(pos + span + 1).min(len);
    r.filter(move |&p| p != pos)
}

/// Result of a training run.
#[derive(Clone, Debug)]
pub struct TrainedEmbeddings<F: Scalar> {
    pub table: EmbeddingTable<F>,
    /// Mean negated objective per update, one entry per epoch.
    pub epoch_losses: Vec<f64>,
}

struct SharedMatrix {
    cells: Vec<AtomicU64>,
    dim: usize,
}

impl SharedMatrix {
    fn from_values<F: Scalar>(values: &[F], dim: usize) -> Self {
        SharedMatrix {
            cells: values.iter().map(|x| AtomicU64::new(x.to_bits_u64())).collect(),
            dim,
        }
    }

    #[inline]
    fn load_row<F: Scalar>(&self, row: usize, out: &mut [F]) {
        let cells = &self.cells[row * self.dim..(row + 1) * self.dim];
        for (o, c) in out.iter_mut().zip(cells) {
            *o = F::from_bits_u64(c.load(Ordering::Relaxed));
        }
    }

    /// `row += scale * delta`
    #[inline]
    fn add_row<F: Scalar>(&self, row: usize, scale: F, delta: &[F]) {
        let cells = &self.cells[row * self.dim..(row + 1) * self.dim];
        for (c, &d) in cells.iter().zip(delta) {
            let x = F::from_bits_u64(c.load(Ordering::Relaxed));
            c.store((x + scale * d).to_bits_u64(), Ordering::Relaxed);
        }
    }

    fn into_values<F: Scalar>(self) -> Vec<F> {
        self.cells
            .into_iter()
            .map(|c| F::from_bits_u64(c.into_inner()))
            .collect()
    }
}

struct Trainer<'a> {
    config: &'a EmbedTrainConfig,
    vocab: &'a Vocab,
    input: SharedMatrix,
    output: SharedMatrix,
    noise: WeightedIndex<f64>,
    processed: AtomicU64,
    total_work: u64,
}

#[derive(Clone, Copy, Default)]
struct LossAcc {
    sum: f64,
    n: u64,
}

impl Trainer<'_> {
    fn learning_rate(&self) -> f64 {
        let done = self.processed.load(Ordering::Relaxed) as f64;
        let lr0 = self.config.initial_learning_rate;
        (lr0 * (1.0 - done / (self.total_work as f64 + 1.0))).max(lr0 * 1e-4)
    }

    fn keep(&self, index: usize, rng: &mut ChaCha8Rng) -> bool {
        let t = self.config.subsample_threshold;
        if t <= 0.0 {
            return true;
        }
        let scaled = t * self.vocab.total() as f64;
        let c = self.vocab.counts[index] as f64;
        let p = ((c / scaled).sqrt() + 1.0) * scaled / c;
        p >= rng.random::<f64>()
    }

    /// One output-side update: trains `target` against hidden vector `h`,
    /// accumulating the hidden-side gradient into `grad_h`.
    fn train_target<F: Scalar>(&self, h: &[F], target: usize, label: F, lr: F, u: &mut [F], grad_h: &mut [F]) -> f64 {
        self.output.load_row(target, u);
        let s = dot(u, h);
        let g = sigmoid(s) - label;
        for (gh, &x) in grad_h.iter_mut().zip(u.iter()) {
            *gh = *gh + g * x;
        }
        self.output.add_row(target, -lr * g, h);
        let signed = if label > F::zero() { s } else { -s };
        -log_sigmoid(signed).as_f64()
    }

    fn run_shard<F: Scalar>(&self, shard: &[QueryTokens], worker: usize) -> Vec<LossAcc> {
        let cfg = self.config;
        let dim = cfg.dimension;
        let mut rng = ChaCha8Rng::seed_from_u64(
            cfg.seed
                .wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(worker as u64 + 1)),
        );
        let mut h = vec![F::zero(); dim];
        let mut u = vec![F::zero(); dim];
        let mut ctx = vec![F::zero(); dim];
        let mut grad_h = vec![F::zero(); dim];
        let mut ids = Vec::new();
        let mut losses = vec![LossAcc::default(); cfg.epochs];

        for acc in losses.iter_mut() {
            for q in shard {
                ids.clear();
                ids.extend(
                    q.tokens()
                        .iter()
                        .filter_map(|t| self.vocab.index_of(t))
                        .filter(|&i| self.keep(i, &mut rng)),
                );
                let lr = F::of(self.learning_rate());
                for pos in 0..ids.len() {
                    let span = cfg.window - rng.random_range(0..cfg.window);
                    let center = ids[pos];
                    match cfg.architecture {
                        Architecture::SkipGram => {
                            for cpos in context_positions(pos, ids.len(), span) {
                                self.input.load_row(center, &mut h);
                                grad_h.iter_mut().for_each(|g| *g = F::zero());
                                let mut loss = self.train_target(&h, ids[cpos], F::one(), lr, &mut u, &mut grad_h);
                                for _ in 0..cfg.negative_samples {
                                    let neg = self.noise.sample(&mut rng);
                                    if neg == ids[cpos] {
                                        continue;
                                    }
                                    loss += self.train_target(&h, neg, F::zero(), lr, &mut u, &mut grad_h);
                                }
                                self.input.add_row(center, -lr, &grad_h);
                                acc.sum += loss;
                                acc.n += 1;
                            }
                        }
                        Architecture::Cbow => {
                            h.iter_mut().for_each(|x| *x = F::zero());
                            let mut n_ctx = 0usize;
                            for cpos in context_positions(pos, ids.len(), span) {
                                self.input.load_row(ids[cpos], &mut ctx);
                                for (a, &b) in h.iter_mut().zip(&ctx) {
                                    *a = *a + b;
                                }
                                n_ctx += 1;
                            }
                            if n_ctx == 0 {
                                continue;
                            }
                            let inv = F::one() / F::of(n_ctx as f64);
                            h.iter_mut().for_each(|x| *x = *x * inv);
                            grad_h.iter_mut().for_each(|g| *g = F::zero());
                            let mut loss = self.train_target(&h, center, F::one(), lr, &mut u, &mut grad_h);
                            for _ in 0..cfg.negative_samples {
                                let neg = self.noise.sample(&mut rng);
                                if neg == center {
                                    continue;
                                }
                                loss += self.train_target(&h, neg, F::zero(), lr, &mut u, &mut grad_h);
                            }
                            for cpos in context_positions(pos, ids.len(), span) {
                                self.input.add_row(ids[cpos], -lr * inv, &grad_h);
                            }
                            acc.sum += loss;
                            acc.n += 1;
                        }
                    }
                }
                self.processed.fetch_add(q.len() as u64, Ordering::Relaxed);
            }
        }
        losses
    }
}

/// Trains embeddings over `corpus`, treating each query as one sentence.
pub fn train_embeddings<F: Scalar>(corpus: &[QueryTokens], config: &EmbedTrainConfig) -> Result<TrainedEmbeddings<F>> {
    config.validate()?;
    let vocab = build_vocab(corpus, config.min_count)?;
    let init = EmbeddingTable::<F>::random_init(vocab, config.dimension, config.seed);
    if config.epochs == 0 {
        return Ok(TrainedEmbeddings {
            table: init,
            epoch_losses: Vec::new(),
        });
    }
    let EmbeddingTable {
        dimension,
        vocab,
        input,
        output,
    } = init;
    let noise = WeightedIndex::new(vocab.counts.iter().map(|&c| (c as f64).powf(0.75)))
        .map_err(|e| Error::ConfigInvalid(format!("noise distribution: {e}")))?;
    let total_tokens: u64 = corpus.iter().map(|q| q.len() as u64).sum();
    let trainer = Trainer {
        config,
        vocab: &vocab,
        input: SharedMatrix::from_values(&input, dimension),
        output: SharedMatrix::from_values(output.as_deref().unwrap_or(&[]), dimension),
        noise,
        processed: AtomicU64::new(0),
        total_work: total_tokens * config.epochs as u64,
    };

    let workers = config.workers.min(corpus.len()).max(1);
    let per_worker: Vec<Vec<LossAcc>> = if workers == 1 {
        vec![trainer.run_shard::<F>(corpus, 0)]
    } else {
        let chunk = corpus.len().div_ceil(workers);
        std::thread::scope(|s| {
            let handles: Vec<_> = corpus
                .chunks(chunk)
                .enumerate()
                .map(|(w, shard)| {
                    let t = &trainer;
                    s.spawn(move || t.run_shard::<F>(shard, w))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("embedding worker panicked"))
                .collect()
        })
    };
    let epoch_losses = (0..config.epochs)
        .map(|e| {
            let (sum, n) = per_worker
                .iter()
                .fold((0.0, 0u64), |(s, n), w| (s + w[e].sum, n + w[e].n));
            if n == 0 {
                0.0
            } else {
                sum / n as f64
            }
        })
        .collect();
    let Trainer { input, output, .. } = trainer;
    Ok(TrainedEmbeddings {
        table: EmbeddingTable {
            dimension,
            vocab,
            input: input.into_values(),
            output: Some(output.into_values()),
        },
        epoch_losses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokenize;
    use crate::scalar::cosine;

    fn corpus(lines: &[&str]) -> Vec<QueryTokens> {
        lines.iter().map(|l| tokenize(l).unwrap()).collect()
    }

    #[test]
    fn vocab_counts_and_threshold() {
        let c = corpus(&["a b", "a c"]);
        let v = build_vocab(&c, 1).unwrap();
        assert_eq!(v.tokens(), ["a", "b", "c"]);
        assert_eq!((v.count("a"), v.count("b"), v.count("c")), (2, 1, 1));
        let v = build_vocab(&c, 2).unwrap();
        assert_eq!(v.tokens(), ["a"]);
        assert!(matches!(build_vocab(&[], 1), Err(Error::EmptyVocab)));
        assert!(matches!(build_vocab(&c, 3), Err(Error::EmptyVocab)));
    }

    #[test]
    fn context_is_clipped_to_query() {
        assert_eq!(context_positions(0, 2, 3).collect::<Vec<_>>(), [1]);
        assert_eq!(context_positions(1, 2, 3).collect::<Vec<_>>(), [0]);
        assert_eq!(context_positions(2, 6, 1).collect::<Vec<_>>(), [1, 3]);
        assert_eq!(context_positions(0, 1, 3).count(), 0);
    }

    #[test]
    fn zero_epochs_keeps_initialization() {
        let c = corpus(&["a b c", "b c d"]);
        let cfg = EmbedTrainConfig {
            dimension: 8,
            epochs: 0,
            min_count: 1,
            ..EmbedTrainConfig::default()
        };
        let trained = train_embeddings::<f64>(&c, &cfg).unwrap();
        let init = EmbeddingTable::<f64>::random_init(build_vocab(&c, 1).unwrap(), 8, cfg.seed);
        assert_eq!(trained.table, init);
        let bound = 0.5 / 8.0;
        assert!(init.input.iter().all(|x| x.abs() <= bound));
        assert!(init.output.as_ref().unwrap().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn config_validation() {
        let ok = EmbedTrainConfig::default();
        assert!(ok.validate().is_ok());
        for bad in [
            EmbedTrainConfig {
                window: 0,
                ..ok.clone()
            },
            EmbedTrainConfig {
                dimension: 0,
                ..ok.clone()
            },
            EmbedTrainConfig {
                negative_samples: 0,
                ..ok.clone()
            },
            EmbedTrainConfig {
                initial_learning_rate: 0.0,
                ..ok.clone()
            },
        ] {
            assert!(matches!(bad.validate(), Err(Error::ConfigInvalid(_))));
        }
    }

    #[test]
    fn lookup_handles_oov() {
        let t = EmbeddingTable::<f64>::from_rows(3, vec![("a".into(), vec![1.0, 0.0, 0.0])]).unwrap();
        assert_eq!(t.lookup("a"), vec![1.0, 0.0, 0.0]);
        assert_eq!(t.lookup("zzz"), vec![0.0; 3]);
        let big = EmbeddingTable::<f32>::from_rows(300, vec![("x".into(), vec![0.5; 300])]).unwrap();
        assert_eq!(big.lookup("unknown"), vec![0.0f32; 300]);
    }

    #[test]
    fn reads_headered_and_headerless_files() {
        let t = EmbeddingTable::<f64>::read_vectors("2 3\na 1 0 0\nb 0 1 0\n".as_bytes()).unwrap();
        assert_eq!((t.dimension(), t.len()), (3, 2));
        assert_eq!(t.get("b").unwrap(), [0.0, 1.0, 0.0]);

        let t = EmbeddingTable::<f64>::read_vectors("the 0.1 0.2\nof -1 3e-2 \n".as_bytes()).unwrap();
        assert_eq!((t.dimension(), t.len()), (2, 2));
        assert_eq!(t.get("of").unwrap(), [-1.0, 0.03]);
    }

    #[test]
    fn read_reports_bad_rows() {
        let err = EmbeddingTable::<f64>::read_vectors("a 1 2\nb 1 2 3\n".as_bytes()).unwrap_err();
        assert!(matches!(
            err,
            Error::DimensionMismatch {
                line: 2,
                expected: 2,
                found: 3
            }
        ));
        let err = EmbeddingTable::<f64>::read_vectors("2 2\na 1 2\nb 1 x\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
        let err = EmbeddingTable::<f64>::read_vectors("3 1\na 1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = EmbeddingTable::<f64>::read_vectors("a nan\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn write_then_read_is_bit_exact() {
        let c = corpus(&["red shoe box", "red shoe", "blue box"]);
        let cfg = EmbedTrainConfig {
            dimension: 7,
            min_count: 1,
            epochs: 3,
            ..EmbedTrainConfig::new(Architecture::SkipGram)
        };
        let table = train_embeddings::<f32>(&c, &cfg).unwrap().table;
        let mut buf = Vec::new();
        table.write_vectors(&mut buf).unwrap();
        let back = EmbeddingTable::<f32>::read_vectors(buf.as_slice()).unwrap();
        for t in table.vocab().tokens() {
            let a: Vec<u32> = table.get(t).unwrap().iter().map(|x| x.to_bits()).collect();
            let b: Vec<u32> = back.get(t).unwrap().iter().map(|x| x.to_bits()).collect();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn save_writes_sidecar_counts() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.txt");
        let c = corpus(&["a b", "a c"]);
        let cfg = EmbedTrainConfig {
            dimension: 4,
            min_count: 1,
            ..EmbedTrainConfig::default()
        };
        let table = train_embeddings::<f64>(&c, &cfg).unwrap().table;
        table.save(&path, Some(&cfg)).unwrap();
        let back: EmbeddingTable<f64> = load_vectors(&path).unwrap();
        assert_eq!(back.vocab().count("a"), 2);
        let meta: EmbeddingMeta = serde_json::from_reader(File::open(sidecar_path(&path)).unwrap()).unwrap();
        assert_eq!(meta.config, Some(cfg));
    }

    #[test]
    fn single_worker_training_is_deterministic() {
        let c = corpus(&["a b c", "b c d", "a d", "c a b"]);
        for arch in [Architecture::SkipGram, Architecture::Cbow] {
            let cfg = EmbedTrainConfig {
                dimension: 5,
                min_count: 1,
                epochs: 4,
                seed: 9,
                ..EmbedTrainConfig::new(arch)
            };
            let a = train_embeddings::<f64>(&c, &cfg).unwrap();
            let b = train_embeddings::<f64>(&c, &cfg).unwrap();
            assert_eq!(a.table, b.table);
            assert_eq!(a.epoch_losses, b.epoch_losses);
        }
    }

    #[test]
    fn multi_worker_training_produces_finite_vectors() {
        let lines: Vec<String> = (0..400)
            .map(|i| format!("t{} t{} t{}", i % 7, (i + 1) % 7, i % 3))
            .collect();
        let c: Vec<QueryTokens> = lines.iter().map(|l| tokenize(l).unwrap()).collect();
        let cfg = EmbedTrainConfig {
            dimension: 10,
            min_count: 1,
            workers: 4,
            ..EmbedTrainConfig::new(Architecture::SkipGram)
        };
        let t = train_embeddings::<f32>(&c, &cfg).unwrap().table;
        assert!(t.input.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn gradients_match_manual_single_pair() {
        let v = [0.3f64, -0.2];
        let u = [0.5f64, 0.1];
        let g = ns_gradients(&v, &u, &[]);
        let s = sigmoid(0.3 * 0.5 - 0.2 * 0.1) - 1.0;
        assert!((g.center[0] - s * 0.5).abs() < 1e-15);
        assert!((g.context[1] - s * -0.2).abs() < 1e-15);
    }

    #[test]
    fn planted_cooccurrence_separates() {
        // x and y always appear together; z lives in disjoint queries.
        let lines: Vec<String> = (0..300)
            .flat_map(|i| [format!("x y a{}", i % 10), format!("b{} z b{}", i % 10, (i + 3) % 10)])
            .collect();
        let c: Vec<QueryTokens> = lines.iter().map(|l| tokenize(l).unwrap()).collect();
        for arch in [Architecture::SkipGram, Architecture::Cbow] {
            let cfg = EmbedTrainConfig {
                dimension: 16,
                min_count: 1,
                epochs: 5,
                subsample_threshold: 0.0,
                ..EmbedTrainConfig::new(arch)
            };
            let t = train_embeddings::<f64>(&c, &cfg).unwrap().table;
            let (x, y, z) = (t.get("x").unwrap(), t.get("y").unwrap(), t.get("z").unwrap());
            assert!(cosine(x, y) > cosine(x, z), "{arch}");
        }
    }
}
