//! Synthetic annotated query corpora with planted multi-token phrases.
//!
//! Tokens are pronounceable pseudo-words ranked by a Zipf law. A fixed
//! inventory of phrases is drawn from the vocabulary (each token joins at most
//! `max_phrases_per_token` phrases). Every query concatenates a few segments,
//! each either a whole phrase or a single Zipf-sampled token, and its gold
//! breaks sit exactly at segment joins. Label noise flips one boundary.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Zipf};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{AnnotatedQuery, QueryTokens, Segmentation};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub vocab_size: usize,
    pub phrase_count: usize,
    /// Inclusive token-length range of phrases.
    pub phrase_length_range: (usize, usize),
    /// Inclusive range of segments per query.
    pub segments_per_query_range: (usize, usize),
    pub query_count: usize,
    pub zipf_exponent: f64,
    /// Probability that a query's gold label has one boundary flipped.
    pub noise_rate: f64,
    /// Probability that a segment is a phrase rather than a single token.
    pub phrase_probability: f64,
    /// Probability that a phrase occurrence appears with its tokens in a
    /// random order; it is still one segment.
    #[serde(default)]
    pub reorder_rate: f64,
    pub max_phrases_per_token: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            vocab_size: 2000,
            phrase_count: 200,
            phrase_length_range: (2, 4),
            segments_per_query_range: (1, 3),
            query_count: 50_000,
            zipf_exponent: 1.0,
            noise_rate: 0.05,
            phrase_probability: 0.3,
            reorder_rate: 0.1,
            max_phrases_per_token: 2,
            seed: 1,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::ConfigInvalid(m));
        let (pl, ph) = self.phrase_length_range;
        let (sl, sh) = self.segments_per_query_range;
        if self.vocab_size == 0 {
            return bad("vocab_size must be positive".into());
        }
        if pl < 2 || pl > ph {
            return bad(format!("phrase_length_range {pl}..={ph} must satisfy 2 <= lo <= hi"));
        }
        if sl < 1 || sl > sh {
            return bad(format!(
                "segments_per_query_range {sl}..={sh} must satisfy 1 <= lo <= hi"
            ));
        }
        for (name, p) in [
            ("noise_rate", self.noise_rate),
            ("phrase_probability", self.phrase_probability),
            ("reorder_rate", self.reorder_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} {p} outside [0, 1]"));
            }
        }
        if !(self.zipf_exponent >= 0.0 && self.zipf_exponent.is_finite()) {
            return bad("zipf_exponent must be non-negative".into());
        }
        if self.phrase_count > 0 && (self.max_phrases_per_token == 0 || ph > self.vocab_size) {
            return bad("phrases cannot be formed from this vocabulary".into());
        }
        if self.phrase_count == 0 && self.phrase_probability > 0.0 {
            return bad("phrase_probability must be 0 without phrases".into());
        }
        if self.phrase_count * pl > self.vocab_size * self.max_phrases_per_token {
            return bad("vocabulary too small for the phrase inventory".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthCorpus {
    pub vocab: Vec<String>,
    pub phrases: Vec<Vec<String>>,
    /// Queries with their (possibly noisy) gold segmentation.
    pub queries: Vec<AnnotatedQuery>,
    /// Noise-free segmentation of each query.
    pub clean: Vec<Segmentation>,
    /// Segment count of each query.
    pub segment_counts: Vec<usize>,
}

impl SynthCorpus {
    pub fn raw_queries(&self) -> impl Iterator<Item = &QueryTokens> {
        self.queries.iter().map(|q| &q.query)
    }
}

const CONSONANTS: &[u8] = b"bcdfghjklmnprstvz";
const VOWELS: &[u8] = b"aeiou";

/// Distinct pseudo-word for each rank.
pub fn pseudo_word(mut rank: usize) -> String {
    let base = CONSONANTS.len() * VOWELS.len();
    let mut syllables = Vec::new();
    loop {
        let s = rank % base;
        syllables.push([CONSONANTS[s / VOWELS.len()], VOWELS[s % VOWELS.len()]]);
        rank /= base;
        if rank == 0 {
            break;
        }
        rank -= 1;
    }
    syllables
        .iter()
        .rev()
        .flat_map(|s| s.iter().map(|&b| b as char))
        .collect()
}

const BLOCK: usize = 4096;

fn zipf(n: usize, s: f64) -> Result<Zipf<f64>> {
    Zipf::new(n as f64, s).map_err(|e| Error::ConfigInvalid(format!("zipf: {e}")))
}

fn build_phrases(config: &SynthConfig, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<usize>>> {
    let (lo, hi) = config.phrase_length_range;
    let mut usage = vec![0usize; config.vocab_size];
    let mut seen = HashSet::new();
    let mut phrases = Vec::with_capacity(config.phrase_count);
    let mut attempts = 0usize;
    while phrases.len() < config.phrase_count {
        attempts += 1;
        if attempts > 1000 * config.phrase_count.max(1) {
            return Err(Error::ConfigInvalid("could not place all phrases".into()));
        }
        let len = rng.random_range(lo..=hi);
        let mut p: Vec<usize> = Vec::with_capacity(len);
        while p.len() < len {
            let t = rng.random_range(0..config.vocab_size);
            if usage[t] < config.max_phrases_per_token && !p.contains(&t) {
                p.push(t);
            } else if usage.iter().filter(|&&u| u < config.max_phrases_per_token).count() < len - p.len() {
                break;
            }
        }
        if p.len() == len && seen.insert(p.clone()) {
            for &t in &p {
                usage[t] += 1;
            }
            phrases.push(p);
        }
    }
    Ok(phrases)
}

/// Generates a corpus; identical configs give identical corpora.
pub fn generate_corpus(config: &SynthConfig) -> Result<SynthCorpus> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let vocab: Vec<String> = (0..config.vocab_size).map(pseudo_word).collect();
    let phrase_ids = build_phrases(config, &mut rng)?;
    let token_dist = zipf(config.vocab_size, config.zipf_exponent)?;
    let phrase_dist = if phrase_ids.is_empty() {
        None
    } else {
        Some(zipf(phrase_ids.len(), config.zipf_exponent)?)
    };

    let n_blocks = config.query_count.div_ceil(BLOCK);
    let blocks: Vec<Vec<(QueryTokens, Segmentation, Segmentation, usize)>> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(b as u64 + 1);
            let count = BLOCK.min(config.query_count - b * BLOCK);
            (0..count)
                .map(|_| {
                    let (slo, shi) = config.segments_per_query_range;
                    let n_seg = rng.random_range(slo..=shi);
                    let mut tokens = Vec::new();
                    let mut breaks = Vec::new();
                    for s in 0..n_seg {
                        if s > 0 {
                            breaks.push(true);
                        }
                        let use_phrase = phrase_dist.is_some() && rng.random_bool(config.phrase_probability);
                        match (use_phrase, &phrase_dist) {
                            (true, Some(pd)) => {
                                let p = &phrase_ids[pd.sample(&mut rng) as usize - 1];
                                if rng.random_bool(config.reorder_rate) {
                                    let mut order = p.clone();
                                    order.shuffle(&mut rng);
                                    tokens.extend(order.iter().map(|&t| vocab[t].clone()));
                                } else {
                                    tokens.extend(p.iter().map(|&t| vocab[t].clone()));
                                }
                                breaks.extend(std::iter::repeat_n(false, p.len() - 1));
                            }
                            _ => tokens.push(vocab[token_dist.sample(&mut rng) as usize - 1].clone()),
                        }
                    }
                    let clean = Segmentation::new(breaks.clone());
                    if !breaks.is_empty() && rng.random_bool(config.noise_rate) {
                        let i = rng.random_range(0..breaks.len());
                        breaks[i] = !breaks[i];
                    }
                    let q = QueryTokens::new(tokens).expect("segments are non-empty");
                    (q, Segmentation::new(breaks), clean, n_seg)
                })
                .collect()
        })
        .collect();

    let mut out = SynthCorpus {
        vocab: vocab.clone(),
        phrases: phrase_ids
            .iter()
            .map(|p| p.iter().map(|&t| vocab[t].clone()).collect())
            .collect(),
        queries: Vec::with_capacity(config.query_count),
        clean: Vec::with_capacity(config.query_count),
        segment_counts: Vec::with_capacity(config.query_count),
    };
    for (q, gold, clean, n_seg) in blocks.into_iter().flatten() {
        out.queries.push(AnnotatedQuery::with_gold(q, gold)?);
        out.clean.push(clean);
        out.segment_counts.push(n_seg);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn small(seed: u64) -> SynthConfig {
        SynthConfig {
            vocab_size: 300,
            phrase_count: 40,
            query_count: 5000,
            seed,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn pseudo_words_are_distinct() {
        let words: HashSet<String> = (0..100_000).map(pseudo_word).collect();
        assert_eq!(words.len(), 100_000);
        assert_eq!(pseudo_word(0), "ba");
    }

    #[test]
    fn deterministic_per_seed() {
        assert_eq!(generate_corpus(&small(3)).unwrap(), generate_corpus(&small(3)).unwrap());
        assert_ne!(
            generate_corpus(&small(3)).unwrap().queries,
            generate_corpus(&small(4)).unwrap().queries
        );
    }

    #[test]
    fn single_phrase_queries_have_no_breaks() {
        let cfg = SynthConfig {
            segments_per_query_range: (1, 1),
            phrase_probability: 1.0,
            noise_rate: 0.0,
            ..small(1)
        };
        let c = generate_corpus(&cfg).unwrap();
        assert!(c.queries.iter().all(|q| q.gold.as_ref().unwrap().break_count() == 0));
        assert!(c.queries.iter().all(|q| q.query.len() >= 2));
    }

    #[test]
    fn clean_breaks_match_segment_joins() {
        let cfg = SynthConfig {
            noise_rate: 0.0,
            ..small(2)
        };
        let c = generate_corpus(&cfg).unwrap();
        // Reordered occurrences keep the phrase's token multiset.
        let sorted = |s: &[String]| {
            let mut v = s.to_vec();
            v.sort();
            v
        };
        let phrases: HashSet<Vec<String>> = c.phrases.iter().map(|p| sorted(p)).collect();
        for ((aq, clean), &n) in c.queries.iter().zip(&c.clean).zip(&c.segment_counts) {
            assert_eq!(aq.gold.as_ref(), Some(clean));
            assert_eq!(clean.break_count(), n - 1);
            for seg in clean.segments(&aq.query).unwrap() {
                assert!(seg.len() == 1 || phrases.contains(&sorted(seg)));
            }
        }
    }

    #[test]
    fn reorder_rate_controls_phrase_order() {
        let exact = |rate: f64| {
            let cfg = SynthConfig {
                segments_per_query_range: (1, 1),
                phrase_probability: 1.0,
                noise_rate: 0.0,
                reorder_rate: rate,
                ..small(9)
            };
            let c = generate_corpus(&cfg).unwrap();
            let phrases: HashSet<&[String]> = c.phrases.iter().map(Vec::as_slice).collect();
            let hits = c.queries.iter().filter(|q| phrases.contains(q.query.tokens())).count();
            hits as f64 / c.queries.len() as f64
        };
        assert_eq!(exact(0.0), 1.0);
        // a shuffle can land on the original order
        let r = exact(1.0);
        assert!(r > 0.1 && r < 0.6, "{r}");
    }

    #[test]
    fn noise_flips_exactly_one_boundary() {
        let cfg = SynthConfig {
            noise_rate: 1.0,
            ..small(5)
        };
        let c = generate_corpus(&cfg).unwrap();
        for (aq, clean) in c.queries.iter().zip(&c.clean) {
            let gold = aq.gold.as_ref().unwrap();
            let diff = gold.breaks().iter().zip(clean.breaks()).filter(|(a, b)| a != b).count();
            assert_eq!(diff, usize::from(!clean.is_empty()));
        }
    }

    #[test]
    fn phrase_usage_is_capped() {
        let c = generate_corpus(&small(7)).unwrap();
        let mut usage: HashMap<&str, usize> = HashMap::new();
        for p in &c.phrases {
            for t in p {
                *usage.entry(t).or_default() += 1;
            }
        }
        assert!(usage.values().all(|&u| u <= 2));
        assert_eq!(c.phrases.len(), 40);
    }

    #[test]
    fn invalid_configs() {
        for cfg in [
            SynthConfig {
                phrase_length_range: (1, 3),
                ..small(1)
            },
            SynthConfig {
                segments_per_query_range: (3, 2),
                ..small(1)
            },
            SynthConfig {
                noise_rate: 1.5,
                ..small(1)
            },
            SynthConfig {
                vocab_size: 10,
                phrase_count: 50,
                ..small(1)
            },
        ] {
            assert!(matches!(generate_corpus(&cfg), Err(Error::ConfigInvalid(_))));
        }
    }
}
