use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::Dataset;
use crate::error::{Error, Result};
use crate::scalar::{dot, log_sigmoid, sigmoid, Scalar};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticConfig {
    pub learning_rate: f64,
    pub l2: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig {
            learning_rate: 0.05,
            l2: 1e-4,
            batch_size: 256,
            epochs: 50,
            seed: 1,
        }
    }
}

impl LogisticConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::ConfigInvalid("learning rate must be positive".into()));
        }
        if self.l2.is_nan() || self.l2 < 0.0 {
            return Err(Error::ConfigInvalid("l2 must be non-negative".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::ConfigInvalid("batch size must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct LogisticModel<F: Scalar> {
    pub weights: Vec<F>,
    pub bias: F,
    pub l2: f64,
    pub learning_rate: f64,
}

impl<F: Scalar> LogisticModel<F> {
    pub fn zeros(n_features: usize) -> Self {
        LogisticModel {
            weights: vec![F::zero(); n_features],
            bias: F::zero(),
            l2: 0.0,
            learning_rate: 0.0,
        }
    }

    pub fn n_features(&self) -> usize {
        self.weights.len()
    }

    /// Break probability; the caller guarantees `x.len() == n_features()`.
    pub fn probability(&self, x: &[F]) -> F {
        sigmoid(dot(&self.weights, x) + self.bias)
    }
}

/// Mean log-loss over the rows plus `(l2 / 2)·‖w‖²`.
pub fn logistic_loss<F: Scalar>(weights: &[F], bias: F, data: &Dataset<F>, l2: f64) -> F {
    let n = data.n_rows();
    let total = (0..n).fold(F::zero(), |acc, i| {
        let z = dot(weights, data.row(i)) + bias;
        acc - if data.label(i) { log_sigmoid(z) } else { log_sigmoid(-z) }
    });
    total / F::of(n as f64) + F::of(0.5 * l2) * dot(weights, weights)
}

/// Gradient of the objective restricted to `rows`, returned as `(∂w, ∂b)`.
pub fn logistic_gradient<F: Scalar>(weights: &[F], bias: F, data: &Dataset<F>, rows: &[usize], l2: f64) -> (Vec<F>, F) {
    let mut gw = vec![F::zero(); weights.len()];
    let mut gb = F::zero();
    for &i in rows {
        let x = data.row(i);
        let y = if data.label(i) { F::one() } else { F::zero() };
        let r = sigmoid(dot(weights, x) + bias) - y;
        for (g, &xi) in gw.iter_mut().zip(x) {
            *g = *g + r * xi;
        }
        gb = gb + r;
    }
    let inv = F::one() / F::of(rows.len() as f64);
    let l2 = F::of(l2);
    for (g, &w) in gw.iter_mut().zip(weights) {
        *g = *g * inv + l2 * w;
    }
    (gw, gb * inv)
}

/// Mini-batch gradient descent on the regularized log-loss.
pub fn train_logistic<F: Scalar>(data: &Dataset<F>, config: &LogisticConfig) -> Result<LogisticModel<F>> {
    config.validate()?;
    data.require_both_classes()?;
    let mut w = vec![F::zero(); data.n_features()];
    let mut b = F::zero();
    let lr = F::of(config.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..data.n_rows()).collect();
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let (gw, gb) = logistic_gradient(&w, b, data, batch, config.l2);
            for (wi, g) in w.iter_mut().zip(gw) {
                *wi = *wi - lr * g;
            }
            b = b - lr * gb;
        }
    }
    Ok(LogisticModel {
        weights: w,
        bias: b,
        l2: config.l2,
        learning_rate: config.learning_rate,
    })
}
