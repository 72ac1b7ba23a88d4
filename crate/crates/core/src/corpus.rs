//! Query logs, annotated segmentations, annotator aggregation and splits.
//!
//! Annotated lines use `|` between segments and single spaces between the
//! tokens of a segment, e.g. `long sleeve|summer|dress`. Files carrying several
//! annotators hold one such column per annotator, separated by TAB.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reserved segment delimiter of the annotated format.
pub const SEGMENT_DELIMITER: char = '|';

fn is_separator(c: char) -> bool {
    c.is_whitespace() || c == SEGMENT_DELIMITER
}

/// Ordered, normalized tokens of one query.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct QueryTokens(Vec<String>);

impl QueryTokens {
    /// Wraps already-normalized tokens, rejecting empty queries and tokens
    /// that are empty or contain whitespace or the segment delimiter.
    pub fn new(tokens: Vec<String>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::EmptyQuery);
        }
        if let Some(bad) = tokens.iter().find(|t| t.is_empty() || t.chars().any(is_separator)) {
            return Err(Error::ConfigInvalid(format!("invalid token {bad:?}")));
        }
        Ok(QueryTokens(tokens))
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Number of gaps between adjacent tokens, `N - 1`.
    pub fn boundary_count(&self) -> usize {
        self.0.len() - 1
    }

    pub fn into_inner(self) -> Vec<String> {
        self.0
    }
}

impl TryFrom<Vec<String>> for QueryTokens {
    type Error = Error;

    fn try_from(tokens: Vec<String>) -> Result<Self> {
        QueryTokens::new(tokens)
    }
}

impl From<QueryTokens> for Vec<String> {
    fn from(q: QueryTokens) -> Self {
        q.0
    }
}

impl fmt::Display for QueryTokens {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join(" "))
    }
}

/// Break/no-break decision for each of the `N - 1` gaps of a query.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Segmentation(Vec<bool>);

impl Segmentation {
    pub fn new(breaks: Vec<bool>) -> Self {
        Segmentation(breaks)
    }

    pub fn all_breaks(boundaries: usize) -> Self {
        Segmentation(vec![true; boundaries])
    }

    pub fn no_breaks(boundaries: usize) -> Self {
        Segmentation(vec![false; boundaries])
    }

    pub fn breaks(&self) -> &[bool] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn break_count(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn check_fits(&self, query: &QueryTokens) -> Result<()> {
        if self.0.len() != query.boundary_count() {
            return Err(Error::LengthMismatch {
                expected: query.boundary_count(),
                found: self.0.len(),
            });
        }
        Ok(())
    }

    /// Half-open token ranges of the segments, left to right.
    pub fn segment_spans(&self) -> Vec<(usize, usize)> {
        let mut spans = Vec::with_capacity(self.break_count() + 1);
        let mut start = 0;
        for (i, &b) in self.0.iter().enumerate() {
            if b {
                spans.push((start, i + 1));
                start = i + 1;
            }
        }
        spans.push((start, self.0.len() + 1));
        spans
    }

    /// Segments of `query` as token slices.
    pub fn segments<'q>(&self, query: &'q QueryTokens) -> Result<Vec<&'q [String]>> {
        self.check_fits(query)?;
        Ok(self
            .segment_spans()
            .into_iter()
            .map(|(a, b)| &query.tokens()[a..b])
            .collect())
    }
}

impl From<Vec<bool>> for Segmentation {
    fn from(v: Vec<bool>) -> Self {
        Segmentation(v)
    }
}

/// A query with its annotator segmentations and, once aggregated, a gold label.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedQuery {
    pub query: QueryTokens,
    pub annotations: Vec<Segmentation>,
    pub gold: Option<Segmentation>,
}

impl AnnotatedQuery {
    pub fn new(query: QueryTokens, annotations: Vec<Segmentation>) -> Result<Self> {
        for a in &annotations {
            a.check_fits(&query)?;
        }
        Ok(AnnotatedQuery {
            query,
            annotations,
            gold: None,
        })
    }

    /// Single-annotation query whose annotation is also its gold label.
    pub fn with_gold(query: QueryTokens, gold: Segmentation) -> Result<Self> {
        gold.check_fits(&query)?;
        Ok(AnnotatedQuery {
            query,
            annotations: vec![gold.clone()],
            gold: Some(gold),
        })
    }
}

/// Train/validation/test proportions and the shuffle seed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub test_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train: f64, val: f64, test: f64, seed: u64) -> Result<Self> {
        let spec = SplitSpec {
            train_fraction: train,
            val_fraction: val,
            test_fraction: test,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// 80/20 train/test, then 80/20 train/validation inside the training part.
    pub fn nested_80_20(seed: u64) -> Self {
        SplitSpec {
            train_fraction: 0.64,
            val_fraction: 0.16,
            test_fraction: 0.20,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fr = [self.train_fraction, self.val_fraction, self.test_fraction];
        if fr.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(Error::ConfigInvalid(format!("split fractions out of [0,1]: {fr:?}")));
        }
        if (fr.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::ConfigInvalid(format!("split fractions do not sum to 1: {fr:?}")));
        }
        Ok(())
    }

    /// Partition sizes for `n` items; rounding remainder goes to train.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        let part = |f: f64| ((n as f64) * f + 1e-9).floor() as usize;
        let val = part(self.val_fraction);
        let test = part(self.test_fraction).min(n - val);
        (n - val - test, val, test)
    }
}

/// Parses `train/val/test`, e.g. `0.6/0.2/0.2`; the seed is left at 0.
impl FromStr for SplitSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<f64> = s
            .split('/')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::ConfigInvalid(format!("split {s:?}: {e}")))?;
        match parts[..] {
            [a, b, c] => SplitSpec::new(a, b, c, 0),
            _ => Err(Error::ConfigInvalid(format!("split {s:?} needs three fractions"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Split<T> {
    pub train: Vec<T>,
    pub val: Vec<T>,
    pub test: Vec<T>,
}

/// Lowercases and splits on runs of whitespace (and the reserved `|`).
pub fn tokenize(raw_query: &str) -> Result<QueryTokens> {
    let tokens: Vec<String> = raw_query
        .split(is_separator)
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect();
    QueryTokens::new(tokens)
}

/// Parses one pipe-delimited annotated query.
pub fn parse_annotated_line(line: &str) -> Result<(QueryTokens, Segmentation)> {
    parse_annotated_at(line, 1)
}

fn parse_annotated_at(line: &str, lineno: usize) -> Result<(QueryTokens, Segmentation)> {
    if line.trim().is_empty() {
        return Err(Error::malformed(lineno, "empty line"));
    }
    let mut tokens = Vec::new();
    let mut breaks = Vec::new();
    for (i, segment) in line.split(SEGMENT_DELIMITER).enumerate() {
        let seg_tokens: Vec<String> = segment.split_whitespace().map(str::to_lowercase).collect();
        if seg_tokens.is_empty() {
            return Err(Error::malformed(lineno, format!("segment {} is empty", i + 1)));
        }
        if i > 0 {
            breaks.push(true);
        }
        breaks.extend(std::iter::repeat_n(false, seg_tokens.len() - 1));
        tokens.extend(seg_tokens);
    }
    Ok((QueryTokens(tokens), Segmentation(breaks)))
}

/// Renders a query in pipe format. Inverse of [`parse_annotated_line`].
pub fn format_pipe(query: &QueryTokens, seg: &Segmentation) -> Result<String> {
    seg.check_fits(query)?;
    let mut out = String::new();
    for (i, tok) in query.tokens().iter().enumerate() {
        if i > 0 {
            out.push(if seg.0[i - 1] { SEGMENT_DELIMITER } else { ' ' });
        }
        out.push_str(tok);
    }
    Ok(out)
}

/// Parses a line of TAB-separated annotator columns over the same tokens.
pub fn parse_annotation_columns(line: &str, lineno: usize) -> Result<AnnotatedQuery> {
    let mut query: Option<QueryTokens> = None;
    let mut annotations = Vec::new();
    for column in line.split('\t') {
        let (q, seg) = parse_annotated_at(column, lineno)?;
        match &query {
            Some(prev) if *prev != q => {
                return Err(Error::malformed(lineno, "annotator columns disagree on tokens"));
            }
            Some(_) => {}
            None => query = Some(q),
        }
        annotations.push(seg);
    }
    let query = query.ok_or_else(|| Error::malformed(lineno, "empty line"))?;
    Ok(AnnotatedQuery {
        query,
        annotations,
        gold: None,
    })
}

fn identical_groups(aq: &AnnotatedQuery) -> Result<BTreeMap<&Segmentation, usize>> {
    let mut groups = BTreeMap::new();
    for a in &aq.annotations {
        a.check_fits(&aq.query)?;
        *groups.entry(a).or_insert(0) += 1;
    }
    Ok(groups)
}

/// Segmentation shared verbatim by at least `min_agree` annotators.
///
/// When several qualify, the most frequent wins; equal counts resolve to the
/// lexicographically smallest break vector, so the result does not depend on
/// annotation order.
pub fn aggregate_annotations(aq: &AnnotatedQuery, min_agree: usize) -> Result<Option<Segmentation>> {
    if min_agree == 0 {
        return Err(Error::ConfigInvalid("min_agree must be at least 1".into()));
    }
    let groups = identical_groups(aq)?;
    let best =
        groups
            .into_iter()
            .filter(|&(_, n)| n >= min_agree)
            .fold(None::<(&Segmentation, usize)>, |best, (seg, n)| match best {
                Some((_, bn)) if bn >= n => best,
                _ => Some((seg, n)),
            });
    Ok(best.map(|(s, _)| s.clone()))
}

/// Largest number of annotators agreeing on one segmentation (0 without annotations).
pub fn agreement_level(aq: &AnnotatedQuery) -> Result<usize> {
    Ok(identical_groups(aq)?.into_values().max().unwrap_or(0))
}

/// Counts queries per agreement level.
pub fn agreement_histogram(queries: &[AnnotatedQuery]) -> Result<BTreeMap<usize, usize>> {
    let mut hist = BTreeMap::new();
    let k = queries.first().map_or(0, |q| q.annotations.len());
    for aq in queries {
        if aq.annotations.len() != k {
            return Err(Error::ConfigInvalid(format!(
                "annotator count {} differs from {k}",
                aq.annotations.len()
            )));
        }
        *hist.entry(agreement_level(aq)?).or_insert(0) += 1;
    }
    Ok(hist)
}

/// Applies [`aggregate_annotations`] to every query, dropping those without
/// an agreed segmentation.
pub fn aggregate_corpus(queries: Vec<AnnotatedQuery>, min_agree: usize) -> Result<Vec<AnnotatedQuery>> {
    let mut kept = Vec::with_capacity(queries.len());
    for mut aq in queries {
        if let Some(gold) = aggregate_annotations(&aq, min_agree)? {
            aq.gold = Some(gold);
            kept.push(aq);
        }
    }
    Ok(kept)
}

/// Seeded shuffle followed by a contiguous cut; each partition keeps the
/// original relative order of its items.
pub fn split_corpus<T: Clone>(items: &[T], spec: &SplitSpec) -> Result<Split<T>> {
    spec.validate()?;
    if items.is_empty() {
        return Err(Error::ConfigInvalid("cannot split an empty corpus".into()));
    }
    let (n_train, n_val, _) = spec.sizes(items.len());
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let take = |idx: &[usize]| {
        let mut idx = idx.to_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| items[i].clone()).collect::<Vec<_>>()
    };
    Ok(Split {
        train: take(&order[..n_train]),
        val: take(&order[n_train..n_train + n_val]),
        test: take(&order[n_train + n_val..]),
    })
}

/// One query per line; blank lines are skipped.
pub fn read_raw_log<R: BufRead>(reader: R) -> Result<Vec<QueryTokens>> {
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        match tokenize(&line) {
            Ok(q) => out.push(q),
            Err(Error::EmptyQuery) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Reads an annotated file with one or more annotator columns per line.
/// Single-column lines get that column as their gold label.
pub fn read_annotated<R: BufRead>(reader: R) -> Result<Vec<AnnotatedQuery>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut aq = parse_annotation_columns(&line, i + 1)?;
        if aq.annotations.len() == 1 {
            aq.gold = aq.annotations.first().cloned();
        }
        out.push(aq);
    }
    Ok(out)
}

/// Writes gold labels in single-column pipe format. Queries without gold are
/// rejected.
pub fn write_gold<W: Write>(mut writer: W, queries: &[AnnotatedQuery]) -> Result<()> {
    for aq in queries {
        let gold = aq
            .gold
            .as_ref()
            .ok_or_else(|| Error::ConfigInvalid(format!("query {:?} has no gold label", aq.query.to_string())))?;
        writeln!(writer, "{}", format_pipe(&aq.query, gold)?)?;
    }
    Ok(())
}

pub fn write_raw_log<'a, W: Write>(mut writer: W, queries: impl IntoIterator<Item = &'a QueryTokens>) -> Result<()> {
    for q in queries {
        writeln!(writer, "{q}")?;
    }
    Ok(())
}

/// Drops every query whose token sequence occurs in `excluded`.
pub fn exclude_queries(log: Vec<QueryTokens>, excluded: &[QueryTokens]) -> Vec<QueryTokens> {
    let excluded: HashMap<&QueryTokens, ()> = excluded.iter().map(|q| (q, ())).collect();
    log.into_iter().filter(|q| !excluded.contains_key(q)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn seg(v: &[bool]) -> Segmentation {
        Segmentation::new(v.to_vec())
    }

    fn toks(s: &str) -> QueryTokens {
        tokenize(s).unwrap()
    }

    const T: bool = true;
    const F: bool = false;

    #[test]
    fn tokenize_lowercases_and_splits() {
        assert_eq!(
            toks("Long  Sleeve Summer dress").tokens(),
            ["long", "sleeve", "summer", "dress"]
        );
        assert_eq!(toks("dress").tokens(), ["dress"]);
        assert!(matches!(tokenize("   "), Err(Error::EmptyQuery)));
        assert_eq!(toks("a\u{3000}b\tc").len(), 3);
    }

    #[test]
    fn parse_running_example() {
        let (q, s) = parse_annotated_line("long sleeve|summer|dress").unwrap();
        assert_eq!(q.tokens(), ["long", "sleeve", "summer", "dress"]);
        assert_eq!(s.breaks(), [F, T, T]);
        let (q, s) = parse_annotated_line("dress").unwrap();
        assert_eq!(q.len(), 1);
        assert!(s.is_empty());
    }

    #[test]
    fn parse_rejects_empty_segments() {
        for bad in ["a b|", "", "|a", "a||b", "  "] {
            assert!(
                matches!(parse_annotated_line(bad), Err(Error::MalformedLine { .. })),
                "{bad:?}"
            );
        }
    }

    #[test]
    fn spans_and_segments() {
        let q = toks("a b c d");
        let s = seg(&[F, T, T]);
        assert_eq!(s.segment_spans(), vec![(0, 2), (2, 3), (3, 4)]);
        let parts = s.segments(&q).unwrap();
        assert_eq!(parts[0], ["a", "b"]);
        assert!(matches!(seg(&[T]).segments(&q), Err(Error::LengthMismatch { .. })));
    }

    fn annotated(anns: &[&[bool]]) -> AnnotatedQuery {
        let n = anns[0].len() + 1;
        let q = QueryTokens::new((0..n).map(|i| format!("t{i}")).collect()).unwrap();
        AnnotatedQuery::new(q, anns.iter().map(|a| seg(a)).collect()).unwrap()
    }

    #[test]
    fn aggregation_examples() {
        let aq = annotated(&[&[T, F], &[T, F], &[F, T]]);
        assert_eq!(aggregate_annotations(&aq, 2).unwrap(), Some(seg(&[T, F])));
        let aq = annotated(&[&[T], &[F], &[T]]);
        assert_eq!(aggregate_annotations(&aq, 3).unwrap(), None);
        let aq = annotated(&[&[T, F], &[T, F], &[T, F]]);
        assert_eq!(aggregate_annotations(&aq, 3).unwrap(), Some(seg(&[T, F])));
        assert!(aggregate_annotations(&aq, 0).is_err());
    }

    #[test]
    fn aggregation_rejects_bad_lengths() {
        let mut aq = annotated(&[&[T, F], &[T, F]]);
        aq.annotations.push(seg(&[T]));
        assert!(matches!(
            aggregate_annotations(&aq, 2),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(AnnotatedQuery::new(toks("a b"), vec![seg(&[])]).is_err());
    }

    #[test]
    fn agreement_levels() {
        assert_eq!(agreement_level(&annotated(&[&[T], &[T], &[F]])).unwrap(), 2);
        assert_eq!(agreement_level(&annotated(&[&[T, T], &[F, T], &[T, F]])).unwrap(), 1);
        let all: Vec<_> = (0..100).map(|_| annotated(&[&[T], &[T], &[T]])).collect();
        assert_eq!(agreement_histogram(&all).unwrap(), BTreeMap::from([(3, 100)]));
    }

    #[test]
    fn split_sizes() {
        let items: Vec<usize> = (0..50_000).collect();
        let spec = SplitSpec::new(0.6, 0.2, 0.2, 7).unwrap();
        let s = split_corpus(&items, &spec).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (30_000, 10_000, 10_000));

        let items: Vec<usize> = (0..10).collect();
        let s = split_corpus(&items, &SplitSpec::new(0.8, 0.0, 0.2, 1).unwrap()).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (8, 0, 2));

        let spec = SplitSpec::nested_80_20(3);
        assert_eq!(spec.sizes(1000), (640, 160, 200));
    }

    #[test]
    fn split_is_seed_deterministic() {
        let items: Vec<usize> = (0..1000).collect();
        let spec = SplitSpec::new(0.6, 0.2, 0.2, 42).unwrap();
        assert_eq!(
            split_corpus(&items, &spec).unwrap(),
            split_corpus(&items, &spec).unwrap()
        );
        let other = SplitSpec { seed: 43, ..spec };
        assert_ne!(
            split_corpus(&items, &spec).unwrap().test,
            split_corpus(&items, &other).unwrap().test
        );
    }

    #[test]
    fn split_spec_validation() {
        assert!(SplitSpec::new(0.5, 0.2, 0.2, 0).is_err());
        assert!(SplitSpec::new(1.2, -0.2, 0.0, 0).is_err());
        assert_eq!("0.6/0.2/0.2".parse::<SplitSpec>().unwrap().val_fraction, 0.2);
        assert!("0.6/0.4".parse::<SplitSpec>().is_err());
        assert!(split_corpus::<u8>(&[], &SplitSpec::nested_80_20(0)).is_err());
    }

    #[test]
    fn multi_column_files() {
        let text = "a b|c\ta b c\ta b|c\n\nx\tx\tx\n";
        let qs = read_annotated(text.as_bytes()).unwrap();
        assert_eq!(qs.len(), 2);
        assert_eq!(qs[0].annotations.len(), 3);
        assert_eq!(qs[0].gold, None);
        let kept = aggregate_corpus(qs, 2).unwrap();
        assert_eq!(kept[0].gold, Some(seg(&[F, T])));
        assert_eq!(kept[1].gold, Some(seg(&[])));

        let err = read_annotated("a|b\na b\tb a\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::MalformedLine { line: 2, .. }));
    }

    #[test]
    fn exclusion_removes_all_copies() {
        let log = vec![toks("a b"), toks("c"), toks("a b")];
        assert_eq!(exclude_queries(log, &[toks("a b")]), vec![toks("c")]);
    }

    fn query_and_seg() -> impl Strategy<Value = (QueryTokens, Segmentation)> {
        prop::collection::vec("[a-z0-9#'&.-]{1,8}", 1..12).prop_flat_map(|tokens| {
            let n = tokens.len();
            (
                Just(QueryTokens::new(tokens).unwrap()),
                prop::collection::vec(any::<bool>(), n - 1),
            )
                .prop_map(|(q, b)| (q, Segmentation::new(b)))
        })
    }

    proptest! {
        #[test]
        fn pipe_format_round_trips((q, s) in query_and_seg()) {
            let line = format_pipe(&q, &s).unwrap();
            prop_assert_eq!(parse_annotated_line(&line).unwrap(), (q, s));
        }

        #[test]
        fn aggregation_is_order_invariant(
            anns in prop::collection::vec(prop::collection::vec(any::<bool>(), 3), 1..6),
            min_agree in 1usize..4,
            seed in any::<u64>(),
        ) {
            let q = toks("a b c d");
            let aq = AnnotatedQuery::new(q.clone(), anns.iter().cloned().map(Segmentation::new).collect()).unwrap();
            let mut shuffled = aq.clone();
            shuffled.annotations.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(aggregate_annotations(&aq, min_agree).unwrap(), aggregate_annotations(&shuffled, min_agree).unwrap());
        }

        #[test]
        fn split_is_a_partition(n in 1usize..300, seed in any::<u64>(), a in 0u32..=10, b in 0u32..=10) {
            prop_assume!(a + b <= 10);
            let c = 10 - a - b;
            let spec = SplitSpec::new(a as f64 / 10.0, b as f64 / 10.0, c as f64 / 10.0, seed).unwrap();
            let items: Vec<usize> = (0..n).collect();
            let s = split_corpus(&items, &spec).unwrap();
            let mut all: Vec<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, items);
        }

        #[test]
        fn histogram_sums_to_size(anns in prop::collection::vec(prop::collection::vec(prop::collection::vec(any::<bool>(), 2), 3), 0..40)) {
            let q = toks("x y z");
            let qs: Vec<_> = anns.into_iter()
                .map(|a| AnnotatedQuery::new(q.clone(), a.into_iter().map(Segmentation::new).collect()).unwrap())
                .collect();
            let h = agreement_histogram(&qs).unwrap();
            prop_assert_eq!(h.values().sum::<usize>(), qs.len());
            prop_assert!(h.keys().all(|&k| (1..=3).contains(&k)));
        }
    }
}
