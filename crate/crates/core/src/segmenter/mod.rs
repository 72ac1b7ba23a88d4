//! Boundary classification: each gap between adjacent tokens is decided
//! independently from the embeddings of the two tokens around it.

mod features;
mod gbdt;
mod grid;
mod logistic;
mod persist;

pub use features::{build_features, push_boundary_feature, BoundaryFeature, Dataset, FeatureMode};
pub use gbdt::{train_gbdt, train_gbdt_with_history, GbdtConfig, GbdtModel, Node, Tree};
pub use grid::{grid_search, write_grid_csv, GridCell, GridResult, GridSearchSpec};
pub use logistic::{logistic_gradient, logistic_loss, train_logistic, LogisticConfig, LogisticModel};
pub use persist::{load_model, read_model, save_model, write_model, ModelFile};

use serde::{Deserialize, Serialize};

use crate::corpus::{QueryTokens, Segmentation};
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::eval::Segmenter;
use crate::scalar::Scalar;

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", tag = "kind", rename_all = "kebab-case")]
pub enum BoundaryModel<F: Scalar> {
    Logistic(LogisticModel<F>),
    Gbdt(GbdtModel<F>),
}

impl<F: Scalar> BoundaryModel<F> {
    pub fn n_features(&self) -> usize {
        match self {
            BoundaryModel::Logistic(m) => m.n_features(),
            BoundaryModel::Gbdt(m) => m.n_features,
        }
    }

    /// Probability of a break for one boundary feature.
    pub fn predict_boundary(&self, feature: &[F]) -> Result<F> {
        if feature.len() != self.n_features() {
            return Err(Error::FeatureLength {
                expected: self.n_features(),
                found: feature.len(),
            });
        }
        Ok(match self {
            BoundaryModel::Logistic(m) => m.probability(feature),
            BoundaryModel::Gbdt(m) => m.probability(feature),
        })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            BoundaryModel::Logistic(_) => "logistic",
            BoundaryModel::Gbdt(_) => "gbdt",
        }
    }
}

pub fn check_threshold(threshold: f64) -> Result<()> {
    if threshold > 0.0 && threshold < 1.0 {
        Ok(())
    } else {
        Err(Error::ConfigInvalid(format!("threshold {threshold} outside (0, 1)")))
    }
}

/// Breaks wherever the predicted probability reaches `threshold`.
pub fn segment_query<F: Scalar>(
    query: &QueryTokens,
    table: &EmbeddingTable<F>,
    model: &BoundaryModel<F>,
    mode: FeatureMode,
    threshold: f64,
) -> Result<Segmentation> {
    check_threshold(threshold)?;
    let mut row = Vec::with_capacity(model.n_features());
    let mut breaks = Vec::with_capacity(query.boundary_count());
    for w in query.tokens().windows(2) {
        row.clear();
        push_boundary_feature(&w[0], &w[1], table, mode, &mut row);
        breaks.push(model.predict_boundary(&row)?.as_f64() >= threshold);
    }
    Ok(Segmentation::new(breaks))
}

/// A trained boundary model bound to its embeddings.
pub struct EmbeddingSegmenter<'a, F: Scalar> {
    pub table: &'a EmbeddingTable<F>,
    pub model: &'a BoundaryModel<F>,
    pub mode: FeatureMode,
    pub threshold: f64,
}

impl<'a, F: Scalar> EmbeddingSegmenter<'a, F> {
    pub fn new(
        table: &'a EmbeddingTable<F>,
        model: &'a BoundaryModel<F>,
        mode: FeatureMode,
        threshold: f64,
    ) -> Result<Self> {
        check_threshold(threshold)?;
        let expected = mode.feature_len(table.dimension());
        if expected != model.n_features() {
            return Err(Error::FeatureLength {
                expected: model.n_features(),
                found: expected,
            });
        }
        Ok(EmbeddingSegmenter {
            table,
            model,
            mode,
            threshold,
        })
    }
}

impl<F: Scalar> Segmenter for EmbeddingSegmenter<'_, F> {
    fn segment(&self, query: &QueryTokens) -> Result<Segmentation> {
        segment_query(query, self.table, self.model, self.mode, self.threshold)
    }
}

/// Thresholded predictions for every row, regrouped per query.
pub(crate) fn predict_groups<F: Scalar>(
    model: &BoundaryModel<F>,
    data: &Dataset<F>,
    threshold: f64,
) -> Result<Vec<(Segmentation, Segmentation)>> {
    let mut out = Vec::with_capacity(data.n_groups());
    for g in 0..data.n_groups() {
        let rows = data.group(g);
        let gold = Segmentation::new(data.labels()[rows.clone()].to_vec());
        let pred = rows
            .map(|r| Ok(model.predict_boundary(data.row(r))?.as_f64() >= threshold))
            .collect::<Result<Vec<bool>>>()?;
        out.push((gold, Segmentation::new(pred)));
    }
    Ok(out)
}
