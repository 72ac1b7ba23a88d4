//! Segmentation accuracy (micro-averaged correct boundary decisions) and query
//! accuracy (exact-match queries).

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::{AnnotatedQuery, QueryTokens, Segmentation};
use crate::error::{Error, Result};

/// Anything that produces a segmentation for a query.
pub trait Segmenter {
    fn segment(&self, query: &QueryTokens) -> Result<Segmentation>;
}

/// Breaks at every gap.
#[derive(Clone, Copy, Debug, Default)]
pub struct AllBreak;

/// Never breaks.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoBreak;

impl Segmenter for AllBreak {
    fn segment(&self, query: &QueryTokens) -> Result<Segmentation> {
        Ok(Segmentation::all_breaks(query.boundary_count()))
    }
}

impl Segmenter for NoBreak {
    fn segment(&self, query: &QueryTokens) -> Result<Segmentation> {
        Ok(Segmentation::no_breaks(query.boundary_count()))
    }
}

fn check(gold: &Segmentation, pred: &Segmentation) -> Result<()> {
    if gold.len() != pred.len() {
        return Err(Error::LengthMismatch {
            expected: gold.len(),
            found: pred.len(),
        });
    }
    Ok(())
}

fn correct_decisions(gold: &Segmentation, pred: &Segmentation) -> usize {
    gold.breaks().iter().zip(pred.breaks()).filter(|(a, b)| a == b).count()
}

/// Correct boundary decisions over all boundary decisions, pooled across
/// queries. A set without boundaries scores 1.
pub fn segmentation_accuracy(pairs: &[(Segmentation, Segmentation)]) -> Result<f64> {
    let (mut correct, mut total) = (0usize, 0usize);
    for (gold, pred) in pairs {
        check(gold, pred)?;
        correct += correct_decisions(gold, pred);
        total += gold.len();
    }
    Ok(if total == 0 { 1.0 } else { correct as f64 / total as f64 })
}

/// Mean of per-query boundary accuracy over queries with at least one boundary.
pub fn macro_segmentation_accuracy(pairs: &[(Segmentation, Segmentation)]) -> Result<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for (gold, pred) in pairs {
        check(gold, pred)?;
        if !gold.is_empty() {
            sum += correct_decisions(gold, pred) as f64 / gold.len() as f64;
            n += 1;
        }
    }
    Ok(if n == 0 { 1.0 } else { sum / n as f64 })
}

/// Fraction of queries segmented exactly right; an empty set scores 1.
pub fn query_accuracy(pairs: &[(Segmentation, Segmentation)]) -> Result<f64> {
    let mut exact = 0usize;
    for (gold, pred) in pairs {
        check(gold, pred)?;
        exact += usize::from(gold == pred);
    }
    Ok(if pairs.is_empty() {
        1.0
    } else {
        exact as f64 / pairs.len() as f64
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryDetail {
    pub query: String,
    pub gold: Segmentation,
    pub predicted: Segmentation,
    pub correct: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub segmentation_accuracy: f64,
    pub query_accuracy: f64,
    pub n_queries: usize,
    pub n_boundaries: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub macro_segmentation_accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_query_detail: Option<Vec<QueryDetail>>,
}

impl EvalReport {
    pub fn from_pairs(method: &str, pairs: &[(Segmentation, Segmentation)]) -> Result<Self> {
        Ok(EvalReport {
            method: method.to_string(),
            segmentation_accuracy: segmentation_accuracy(pairs)?,
            query_accuracy: query_accuracy(pairs)?,
            n_queries: pairs.len(),
            n_boundaries: pairs.iter().map(|(g, _)| g.len()).sum(),
            macro_segmentation_accuracy: None,
            per_query_detail: None,
        })
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct EvalOptions {
    pub macro_average: bool,
    pub per_query_detail: bool,
}

/// Runs `segmenter` over gold-labeled queries and scores it.
pub fn evaluate(
    method: &str,
    segmenter: &dyn Segmenter,
    test: &[AnnotatedQuery],
    options: EvalOptions,
) -> Result<EvalReport> {
    let mut pairs = Vec::with_capacity(test.len());
    for aq in test {
        let gold = aq
            .gold
            .clone()
            .ok_or_else(|| Error::ConfigInvalid(format!("query {:?} has no gold label", aq.query.to_string())))?;
        gold.check_fits(&aq.query)?;
        let pred = segmenter.segment(&aq.query)?;
        pairs.push((gold, pred));
    }
    let mut report = EvalReport::from_pairs(method, &pairs)?;
    if options.macro_average {
        report.macro_segmentation_accuracy = Some(macro_segmentation_accuracy(&pairs)?);
    }
    if options.per_query_detail {
        report.per_query_detail = Some(
            test.iter()
                .zip(pairs)
                .map(|(aq, (gold, predicted))| QueryDetail {
                    query: aq.query.to_string(),
                    correct: gold == predicted,
                    gold,
                    predicted,
                })
                .collect(),
        );
    }
    Ok(report)
}

/// Aligned text table with one row per report.
pub fn render_table(reports: &[EvalReport]) -> String {
    const H: [&str; 3] = ["Method", "Segmentation Accuracy", "Query Accuracy"];
    let w0 = reports
        .iter()
        .map(|r| r.method.len())
        .chain([H[0].len()])
        .max()
        .unwrap_or(0);
    let mut out = String::new();
    let _ = writeln!(out, "{:<w0$}  {}  {}", H[0], H[1], H[2]);
    let _ = writeln!(out, "{}", "-".repeat(w0 + H[1].len() + H[2].len() + 4));
    for r in reports {
        let _ = writeln!(
            out,
            "{:<w0$}  {:>w1$.3}  {:>w2$.3}",
            r.method,
            r.segmentation_accuracy,
            r.query_accuracy,
            w1 = H[1].len(),
            w2 = H[2].len()
        );
    }
    out
}
