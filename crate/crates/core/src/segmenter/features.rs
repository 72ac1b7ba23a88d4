use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{AnnotatedQuery, QueryTokens};
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// How the two token vectors around a boundary are combined.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureMode {
    /// `[v(left) ‖ v(right)]`, length `2D`.
    #[default]
    Concat,
    /// `(v(left) + v(right)) / 2`, length `D`.
    Average,
}

impl FeatureMode {
    pub fn feature_len(self, dimension: usize) -> usize {
        match self {
            FeatureMode::Concat => 2 * dimension,
            FeatureMode::Average => dimension,
        }
    }
}

impl fmt::Display for FeatureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureMode::Concat => "concat",
            FeatureMode::Average => "average",
        })
    }
}

impl FromStr for FeatureMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "concat" => Ok(FeatureMode::Concat),
            "average" => Ok(FeatureMode::Average),
            _ => Err(Error::ConfigInvalid(format!("unknown feature mode {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryFeature<F> {
    pub vector: Vec<F>,
    pub label: Option<bool>,
}

/// Feature vector for the gap between `left` and `right`, appended to `out`.
pub fn push_boundary_feature<F: Scalar>(
    left: &str,
    right: &str,
    table: &EmbeddingTable<F>,
    mode: FeatureMode,
    out: &mut Vec<F>,
) {
    match mode {
        FeatureMode::Concat => {
            table.extend_with(left, out);
            table.extend_with(right, out);
        }
        FeatureMode::Average => {
            let start = out.len();
            table.extend_with(left, out);
            let half = F::of(0.5);
            match table.get(right) {
                Some(r) => {
                    for (o, &x) in out[start..].iter_mut().zip(r) {
                        *o = (*o + x) * half;
                    }
                }
                None => out[start..].iter_mut().for_each(|o| *o = *o * half),
            }
        }
    }
}

/// One unlabeled feature per gap; a 1-token query yields none.
pub fn build_features<F: Scalar>(
    query: &QueryTokens,
    table: &EmbeddingTable<F>,
    mode: FeatureMode,
) -> Vec<BoundaryFeature<F>> {
    query
        .tokens()
        .windows(2)
        .map(|w| {
            let mut vector = Vec::with_capacity(mode.feature_len(table.dimension()));
            push_boundary_feature(&w[0], &w[1], table, mode, &mut vector);
            BoundaryFeature { vector, label: None }
        })
        .collect()
}

/// Dense row-major training matrix of boundary features with labels.
///
/// `groups` holds, per query, the offset of its first row; the final entry is
/// the row count, so query `i` owns rows `groups[i]..groups[i + 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<F> {
    n_features: usize,
    values: Vec<F>,
    labels: Vec<bool>,
    groups: Vec<usize>,
}

impl<F: Scalar> Dataset<F> {
    pub fn new(n_features: usize) -> Self {
        Dataset {
            n_features,
            values: Vec::new(),
            labels: Vec::new(),
            groups: vec![0],
        }
    }

    /// Rows from labeled features, one group per feature.
    pub fn from_features(features: &[BoundaryFeature<F>]) -> Result<Self> {
        let n = features.first().map_or(0, |f| f.vector.len());
        let mut ds = Dataset::new(n);
        for f in features {
            let label = f
                .label
                .ok_or_else(|| Error::ConfigInvalid("training feature without label".into()))?;
            ds.push_row(&f.vector, label)?;
            ds.end_group();
        }
        Ok(ds)
    }

    /// Features and gold labels of every query; queries without gold are rejected.
    pub fn from_queries(queries: &[AnnotatedQuery], table: &EmbeddingTable<F>, mode: FeatureMode) -> Result<Self> {
        let mut ds = Dataset::new(mode.feature_len(table.dimension()));
        let mut row = Vec::with_capacity(ds.n_features);
        for aq in queries {
            let gold = aq
                .gold
                .as_ref()
                .ok_or_else(|| Error::ConfigInvalid(format!("query {:?} has no gold label", aq.query.to_string())))?;
            gold.check_fits(&aq.query)?;
            for (w, &label) in aq.query.tokens().windows(2).zip(gold.breaks()) {
                row.clear();
                push_boundary_feature(&w[0], &w[1], table, mode, &mut row);
                ds.push_row(&row, label)?;
            }
            ds.end_group();
        }
        Ok(ds)
    }

    pub fn push_row(&mut self, row: &[F], label: bool) -> Result<()> {
        if row.len() != self.n_features {
            return Err(Error::FeatureLength {
                expected: self.n_features,
                found: row.len(),
            });
        }
        self.values.extend_from_slice(row);
        self.labels.push(label);
        Ok(())
    }

    pub fn end_group(&mut self) {
        self.groups.push(self.labels.len());
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, i: usize) -> &[F] {
        &self.values[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn label(&self, i: usize) -> bool {
        self.labels[i]
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn n_groups(&self) -> usize {
        self.groups.len() - 1
    }

    pub fn group(&self, g: usize) -> std::ops::Range<usize> {
        self.groups[g]..self.groups[g + 1]
    }

    pub fn positive_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }

    pub fn require_both_classes(&self) -> Result<()> {
        let pos = self.positive_count();
        if pos == 0 || pos == self.n_rows() {
            return Err(Error::DegenerateLabels);
        }
        Ok(())
    }
}
