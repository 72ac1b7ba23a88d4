//! Naive n-gram frequency segmentation baseline.
//!
//! A segmentation is scored by summing, over its multi-token segments `s`,
//! `|s|^|s| * freq(s)` where `freq` counts occurrences of `s` as a contiguous
//! n-gram in a query log. A multi-token segment that never occurs makes the
//! whole segmentation invalid; the all-singleton segmentation scores 0 and is
//! always valid.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{QueryTokens, Segmentation};
use crate::error::{Error, Result};
use crate::eval::Segmenter;

/// Upper bound on query length for exhaustive search.
pub const MAX_EXHAUSTIVE_TOKENS: usize = 20;

pub const DEFAULT_MAX_N: usize = 5;

/// Per-segment weighting of n-gram frequencies.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreWeight {
    /// `|s|^|s| * freq(s)`
    #[default]
    Pow,
    /// `freq(s)`
    FreqOnly,
}

impl ScoreWeight {
    fn factor(self, len: usize) -> f64 {
        match self {
            ScoreWeight::Pow => (len as f64).powi(len as i32),
            ScoreWeight::FreqOnly => 1.0,
        }
    }
}

impl fmt::Display for ScoreWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScoreWeight::Pow => "pow",
            ScoreWeight::FreqOnly => "freq-only",
        })
    }
}

impl FromStr for ScoreWeight {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pow" => Ok(ScoreWeight::Pow),
            "freq-only" => Ok(ScoreWeight::FreqOnly),
            _ => Err(Error::ConfigInvalid(format!("unknown weight {s:?}"))),
        }
    }
}

/// Counts of contiguous token sequences of length `2..=max_n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NGramTable {
    max_n: usize,
    counts: HashMap<Vec<String>, u64>,
}

impl NGramTable {
    pub fn new(max_n: usize) -> Result<Self> {
        if max_n < 2 {
            return Err(Error::ConfigInvalid("max_n must be at least 2".into()));
        }
        Ok(NGramTable {
            max_n,
            counts: HashMap::new(),
        })
    }

    pub fn max_n(&self) -> usize {
        self.max_n
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn freq(&self, ngram: &[String]) -> u64 {
        self.counts.get(ngram).copied().unwrap_or(0)
    }

    /// Adds `count` to a key; keys outside `2..=max_n` or zero counts are rejected.
    pub fn insert(&mut self, ngram: Vec<String>, count: u64) -> Result<()> {
        if ngram.len() < 2 || ngram.len() > self.max_n {
            return Err(Error::ConfigInvalid(format!(
                "n-gram of length {} outside 2..={}",
                ngram.len(),
                self.max_n
            )));
        }
        if count == 0 {
            return Err(Error::ConfigInvalid("n-gram counts must be positive".into()));
        }
        *self.counts.entry(ngram).or_insert(0) += count;
        Ok(())
    }

    pub fn add_query(&mut self, query: &QueryTokens) {
        let toks = query.tokens();
        for n in 2..=self.max_n.min(toks.len()) {
            for w in toks.windows(n) {
                match self.counts.get_mut(w) {
                    Some(c) => *c += 1,
                    None => {
                        self.counts.insert(w.to_vec(), 1);
                    }
                }
            }
        }
    }

    /// Sums another table's counts into this one.
    pub fn merge(&mut self, other: NGramTable) {
        self.max_n = self.max_n.max(other.max_n);
        for (k, v) in other.counts {
            *self.counts.entry(k).or_insert(0) += v;
        }
    }

    /// Entries sorted by space-joined key.
    pub fn sorted_entries(&self) -> Vec<(String, u64)> {
        let mut out: Vec<(String, u64)> = self.counts.iter().map(|(k, &v)| (k.join(" "), v)).collect();
        out.sort_unstable();
        out
    }

    /// Tab-separated `tokens\tcount` lines sorted by key, after a `#` metadata
    /// line (metadata lines contain no TAB).
    pub fn write_tsv<W: Write>(&self, mut w: W, metadata: &str) -> Result<()> {
        writeln!(
            w,
            "#qseg-ngrams max_n={} {}",
            self.max_n,
            metadata.replace(['\t', '\n'], " ")
        )?;
        for (k, v) in self.sorted_entries() {
            writeln!(w, "{k}\t{v}")?;
        }
        Ok(())
    }

    pub fn read_tsv<R: BufRead>(reader: R) -> Result<Self> {
        let mut declared_max: Option<usize> = None;
        let mut entries = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let lineno = i + 1;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let Some((key, count)) = line.split_once('\t') else {
                if let Some(meta) = line.strip_prefix('#') {
                    declared_max = meta
                        .split_whitespace()
                        .find_map(|f| f.strip_prefix("max_n="))
                        .and_then(|v| v.parse().ok())
                        .or(declared_max);
                    continue;
                }
                return Err(Error::parse(lineno, "expected `tokens<TAB>count`"));
            };
            let count: u64 = count
                .trim()
                .parse()
                .map_err(|e| Error::parse(lineno, format!("count: {e}")))?;
            let key: Vec<String> = key.split(' ').map(str::to_string).collect();
            if key.iter().any(String::is_empty) {
                return Err(Error::parse(lineno, "empty token in key"));
            }
            entries.push((lineno, key, count));
        }
        let max_n = declared_max
            .or_else(|| entries.iter().map(|e| e.1.len()).max())
            .unwrap_or(DEFAULT_MAX_N);
        let mut table = NGramTable::new(max_n)?;
        for (lineno, key, count) in entries {
            table
                .insert(key, count)
                .map_err(|e| Error::parse(lineno, e.to_string()))?;
        }
        Ok(table)
    }
}

/// Counts every contiguous n-gram of length `2..=max_n` in the corpus.
pub fn count_ngrams<'a, I>(corpus: I, max_n: usize) -> Result<NGramTable>
where
    I: IntoIterator<Item = &'a QueryTokens>,
{
    let mut table = NGramTable::new(max_n)?;
    for q in corpus {
        table.add_query(q);
    }
    Ok(table)
}

/// Sharded counting; shard tables are summed, so the result equals
/// [`count_ngrams`] for any worker count.
pub fn count_ngrams_parallel(corpus: &[QueryTokens], max_n: usize, workers: usize) -> Result<NGramTable> {
    use rayon::prelude::*;

    let workers = workers.max(1);
    if workers == 1 || corpus.len() < 2 * workers {
        return count_ngrams(corpus, max_n);
    }
    NGramTable::new(max_n)?;
    let chunk = corpus.len().div_ceil(workers);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::ConfigInvalid(e.to_string()))?;
    let shards: Vec<NGramTable> = pool.install(|| {
        corpus
            .par_chunks(chunk)
            .map(|c| count_ngrams(c, max_n))
            .collect::<Result<_>>()
    })?;
    let mut total = NGramTable::new(max_n)?;
    for s in shards {
        total.merge(s);
    }
    Ok(total)
}

/// Score of one segmentation, or `None` when a multi-token segment is unseen.
pub fn score_segmentation(
    query: &QueryTokens,
    seg: &Segmentation,
    table: &NGramTable,
    weight: ScoreWeight,
) -> Result<Option<f64>> {
    let mut score = 0.0;
    for s in seg.segments(query)? {
        if s.len() < 2 {
            continue;
        }
        let f = table.freq(s);
        if f == 0 {
            return Ok(None);
        }
        score += weight.factor(s.len()) * f as f64;
    }
    Ok(Some(score))
}

/// All `2^(n-1)` segmentations of an `n`-token query, in increasing binary
/// order of the break vector read left to right (`false` < `true`).
pub fn enumerate_segmentations(n_tokens: usize) -> Result<Vec<Segmentation>> {
    if n_tokens == 0 {
        return Err(Error::EmptyQuery);
    }
    if n_tokens > MAX_EXHAUSTIVE_TOKENS {
        return Err(Error::TooLong(n_tokens));
    }
    let gaps = n_tokens - 1;
    Ok((0u32..1 << gaps)
        .map(|mask| Segmentation::new((0..gaps).map(|i| mask >> (gaps - 1 - i) & 1 == 1).collect()))
        .collect())
}

/// Maximum-score segmentation by exhaustive search.
///
/// Ties prefer fewer breaks, then the lexicographically smallest break vector.
/// Queries longer than [`MAX_EXHAUSTIVE_TOKENS`] are rejected.
pub fn segment_naive(query: &QueryTokens, table: &NGramTable, weight: ScoreWeight) -> Result<Segmentation> {
    let n = query.len();
    if n > MAX_EXHAUSTIVE_TOKENS {
        return Err(Error::TooLong(n));
    }
    let gaps = n - 1;
    let toks = query.tokens();
    // span_score[a][b - a - 1]: contribution of segment toks[a..b].
    let span_score: Vec<Vec<Option<f64>>> = (0..n)
        .map(|a| {
            (a + 1..=n)
                .map(|b| match b - a {
                    1 => Some(0.0),
                    len => match table.freq(&toks[a..b]) {
                        0 => None,
                        f => Some(weight.factor(len) * f as f64),
                    },
                })
                .collect()
        })
        .collect();

    // Bit `gaps - 1 - i` of a mask is the break after token i, so numeric
    // order equals lexicographic order of break vectors.
    let mut best: Option<(f64, u32, u32)> = None;
    'cand: for mask in 0u32..1 << gaps {
        let mut score = 0.0;
        let mut start = 0;
        for i in 0..=gaps {
            let closes = i == gaps || mask >> (gaps - 1 - i) & 1 == 1;
            if closes {
                match span_score[start][i - start] {
                    Some(s) => score += s,
                    None => continue 'cand,
                }
                start = i + 1;
            }
        }
        let breaks = mask.count_ones();
        let better = match best {
            None => true,
            Some((bs, bb, _)) => score > bs || (score == bs && breaks < bb),
        };
        if better {
            best = Some((score, breaks, mask));
        }
    }
    // The all-singleton candidate is always valid.
    let (_, _, mask) = best.expect("all-singleton segmentation is valid");
    Ok(Segmentation::new(
        (0..gaps).map(|i| mask >> (gaps - 1 - i) & 1 == 1).collect(),
    ))
}

/// [`segment_naive`] over a fixed table.
#[derive(Clone, Copy, Debug)]
pub struct NaiveSegmenter<'a> {
    pub table: &'a NGramTable,
    pub weight: ScoreWeight,
}

impl Segmenter for NaiveSegmenter<'_> {
    fn segment(&self, query: &QueryTokens) -> Result<Segmentation> {
        segment_naive(query, self.table, self.weight)
    }
}
