//! Logistic and linear regression fitted by full-batch gradient descent
//! with an L2 penalty on the weights (the bias is not penalized).

use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::features::DesignMatrix;
use crate::synthgen::sigmoid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinearParams {
    pub l2: f64,
    pub learning_rate: f64,
    pub max_iter: usize,
    /// Stop once the absolute change in loss drops below this.
    pub tol: f64,
}

impl Default for LinearParams {
    fn default() -> Self {
        LinearParams {
            l2: 1e-4,
            learning_rate: 0.1,
            max_iter: 2000,
            tol: 1e-8,
        }
    }
}

/// Affine decision function `w·x + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearModel {
    pub fn zeros(d: usize) -> Self {
        LinearModel {
            weights: vec![0.0; d],
            bias: 0.0,
        }
    }

    pub fn decision(&self, x: &[f64]) -> f64 {
        self.bias + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LinearLoss {
    Logistic,
    Squared,
}

/// log(1 + e^z) without overflow.
pub(crate) fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

pub(crate) struct FitOutcome {
    pub model: LinearModel,
    pub iterations: usize,
    pub final_loss: f64,
}

pub(crate) fn fit(
    x: &DesignMatrix,
    y: &[f64],
    params: &LinearParams,
    loss: LinearLoss,
) -> Result<FitOutcome, ModelError> {
    let n = x.n_rows();
    let d = x.n_cols();
    let inv_n = 1.0 / n as f64;
    let mut model = LinearModel::zeros(d);
    let mut grad = vec![0.0; d];
    let mut prev = f64::INFINITY;
    let mut last = f64::NAN;
    let mut iterations = 0;

    for it in 0..params.max_iter {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut grad_b = 0.0;
        let mut total = 0.0;
        for (row, &target) in x.rows().zip(y) {
            let z = model.decision(row);
            let (l, residual) = match loss {
                LinearLoss::Logistic => (softplus(z) - target * z, sigmoid(z) - target),
                LinearLoss::Squared => (0.5 * (z - target).powi(2), z - target),
            };
            total += l;
            grad_b += residual;
            for (g, v) in grad.iter_mut().zip(row) {
                *g += residual * v;
            }
        }
        let penalty = 0.5 * params.l2 * model.weights.iter().map(|w| w * w).sum::<f64>();
        let current = total * inv_n + penalty;
        if !current.is_finite() {
            return Err(ModelError::Diverged {
                family: "logistic_or_linear",
                iteration: it,
                loss: current,
            });
        }
        last = current;
        iterations = it;
        if (prev - current).abs() < params.tol {
            break;
        }
        prev = current;
        for (w, g) in model.weights.iter_mut().zip(&grad) {
            *w -= params.learning_rate * (g * inv_n + params.l2 * *w);
        }
        model.bias -= params.learning_rate * grad_b * inv_n;
        iterations = it + 1;
    }
    Ok(FitOutcome {
        model,
        iterations,
        final_loss: last,
    })
}
