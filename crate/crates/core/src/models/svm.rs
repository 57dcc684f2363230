//! Linear soft-margin SVM trained in the primal with stochastic hinge-loss
//! subgradient steps (Pegasos). The bias rides along as a constant input, so
//! it shares the weight penalty `λ = 1 / (C·n)`. Step size at update `t` is
//! `1 / (λ t)`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::linear::LinearModel;
use crate::error::ModelError;
use crate::features::DesignMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SvmParams {
    pub c: f64,
    pub epochs: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams { c: 1.0, epochs: 2000 }
    }
}

pub(crate) struct SvmFit {
    pub model: LinearModel,
    pub epochs: usize,
    pub objective: f64,
}

fn objective(model: &LinearModel, x: &DesignMatrix, signs: &[f64], lambda: f64) -> f64 {
    let norm = model.weights.iter().map(|w| w * w).sum::<f64>() + model.bias * model.bias;
    let hinge = x
        .rows()
        .zip(signs)
        .map(|(row, s)| (1.0 - s * model.decision(row)).max(0.0))
        .sum::<f64>()
        / x.n_rows() as f64;
    0.5 * lambda * norm + hinge
}

/// `y` holds 0/1 labels.
pub(crate) fn fit(x: &DesignMatrix, y: &[f64], params: &SvmParams, seed: u64) -> Result<SvmFit, ModelError> {
    let n = x.n_rows();
    let signs: Vec<f64> = y.iter().map(|&v| if v > 0.5 { 1.0 } else { -1.0 }).collect();
    let lambda = 1.0 / (params.c * n as f64);
    let radius = 1.0 / lambda.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut model = LinearModel::zeros(x.n_cols());
    let mut t = 0u64;

    for epoch in 0..params.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let row = x.row(i);
            let violated = signs[i] * model.decision(row) < 1.0;
            let shrink = 1.0 - eta * lambda;
            model.weights.iter_mut().for_each(|w| *w *= shrink);
            model.bias *= shrink;
            if violated {
                let step = eta * signs[i];
                for (w, v) in model.weights.iter_mut().zip(row) {
                    *w += step * v;
                }
                model.bias += step;
            }
            let norm = (model.weights.iter().map(|w| w * w).sum::<f64>() + model.bias * model.bias).sqrt();
            if norm > radius {
                let scale = radius / norm;
                model.weights.iter_mut().for_each(|w| *w *= scale);
                model.bias *= scale;
            }
        }
        if !model.bias.is_finite() || model.weights.iter().any(|w| !w.is_finite()) {
            return Err(ModelError::Diverged {
                family: "svm_linear",
                iteration: epoch,
                loss: f64::NAN,
            });
        }
    }
    let obj = objective(&model, x, &signs, lambda);
    Ok(SvmFit {
        model,
        epochs: params.epochs,
        objective: obj,
    })
}
