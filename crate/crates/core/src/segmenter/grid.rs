use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::features::Dataset;
use super::gbdt::{train_gbdt, GbdtConfig, GbdtModel};
use super::{predict_groups, BoundaryModel, DEFAULT_THRESHOLD};
use crate::error::{Error, Result};
use crate::eval::{query_accuracy, segmentation_accuracy};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSearchSpec {
    pub depth_candidates: Vec<usize>,
    pub estimator_candidates: Vec<usize>,
    pub lr_candidates: Vec<f64>,
}

impl Default for GridSearchSpec {
    fn default() -> Self {
        GridSearchSpec {
            depth_candidates: vec![4, 6],
            estimator_candidates: vec![500, 800],
            lr_candidates: vec![0.1],
        }
    }
}

impl GridSearchSpec {
    pub fn validate(&self) -> Result<()> {
        if self.depth_candidates.is_empty() || self.estimator_candidates.is_empty() || self.lr_candidates.is_empty() {
            return Err(Error::ConfigInvalid("grid candidate lists must be non-empty".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub max_depth: usize,
    pub n_estimators: usize,
    pub shrinkage: f64,
    pub train_segmentation_accuracy: f64,
    pub train_query_accuracy: f64,
    pub val_segmentation_accuracy: f64,
    pub val_query_accuracy: f64,
}

#[derive(Clone, Debug)]
pub struct GridResult<F: Scalar> {
    pub best: GridCell,
    /// Every cell, ordered by depth, shrinkage, then estimator count.
    pub cells: Vec<GridCell>,
    pub model: GbdtModel<F>,
}

fn metrics<F: Scalar>(model: &GbdtModel<F>, data: &Dataset<F>) -> Result<(f64, f64)> {
    let pairs = predict_groups(&BoundaryModel::Gbdt(model.clone()), data, DEFAULT_THRESHOLD)?;
    Ok((segmentation_accuracy(&pairs)?, query_accuracy(&pairs)?))
}

/// Trains one GBDT per (depth, shrinkage) pair with the largest estimator
/// count and scores every estimator candidate by truncating it, which is
/// equivalent to training each cell separately. The best cell has the
/// highest validation segmentation accuracy; ties go to fewer estimators,
/// then smaller depth.
pub fn grid_search<F: Scalar>(
    spec: &GridSearchSpec,
    base: &GbdtConfig,
    train: &Dataset<F>,
    val: &Dataset<F>,
    workers: usize,
) -> Result<GridResult<F>> {
    spec.validate()?;
    if val.n_rows() == 0 {
        return Err(Error::ConfigInvalid("validation split has no boundaries".into()));
    }
    let max_trees = *spec.estimator_candidates.iter().max().expect("non-empty");
    let mut estimators = spec.estimator_candidates.clone();
    estimators.sort_unstable();
    estimators.dedup();
    let combos: Vec<(usize, f64)> = spec
        .depth_candidates
        .iter()
        .flat_map(|&d| spec.lr_candidates.iter().map(move |&lr| (d, lr)))
        .collect();

    let run = |&(depth, lr): &(usize, f64)| -> Result<Vec<(GridCell, GbdtModel<F>)>> {
        let cfg = GbdtConfig {
            n_estimators: max_trees,
            max_depth: depth,
            shrinkage: lr,
            workers: 1,
            ..base.clone()
        };
        let full = train_gbdt(train, &cfg)?;
        estimators
            .iter()
            .map(|&n| {
                let m = full.truncated(n);
                let (tsa, tqa) = metrics(&m, train)?;
                let (vsa, vqa) = metrics(&m, val)?;
                let cell = GridCell {
                    max_depth: depth,
                    n_estimators: n,
                    shrinkage: lr,
                    train_segmentation_accuracy: tsa,
                    train_query_accuracy: tqa,
                    val_segmentation_accuracy: vsa,
                    val_query_accuracy: vqa,
                };
                Ok((cell, m))
            })
            .collect()
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::ConfigInvalid(e.to_string()))?;
    let results: Vec<Vec<(GridCell, GbdtModel<F>)>> =
        pool.install(|| combos.par_iter().map(run).collect::<Result<_>>())?;

    let mut all: Vec<(GridCell, GbdtModel<F>)> = results.into_iter().flatten().collect();
    all.sort_by(|a, b| {
        (a.0.max_depth, a.0.shrinkage, a.0.n_estimators)
            .partial_cmp(&(b.0.max_depth, b.0.shrinkage, b.0.n_estimators))
            .expect("finite grid values")
    });
    let best = all
        .iter()
        .enumerate()
        .max_by(|(_, a), (_, b)| {
            a.0.val_segmentation_accuracy
                .total_cmp(&b.0.val_segmentation_accuracy)
                .then(b.0.n_estimators.cmp(&a.0.n_estimators))
                .then(b.0.max_depth.cmp(&a.0.max_depth))
        })
        .map(|(i, _)| i)
        .expect("non-empty grid");
    let (best_cell, model) = all[best].clone();
    Ok(GridResult {
        best: best_cell,
        cells: all.into_iter().map(|(c, _)| c).collect(),
        model,
    })
}

pub fn write_grid_csv<W: Write>(mut w: W, cells: &[GridCell]) -> Result<()> {
    writeln!(
        w,
        "max_depth,n_estimators,shrinkage,train_segmentation_accuracy,train_query_accuracy,val_segmentation_accuracy,val_query_accuracy"
    )?;
    for c in cells {
        writeln!(
            w,
            "{},{},{},{:.6},{:.6},{:.6},{:.6}",
            c.max_depth,
            c.n_estimators,
            c.shrinkage,
            c.train_segmentation_accuracy,
            c.train_query_accuracy,
            c.val_segmentation_accuracy,
            c.val_query_accuracy
        )?;
    }
    Ok(())
}
