//! Fully connected feed-forward network with ReLU hidden layers and a single
//! output unit: sigmoid + binary cross-entropy for classification,
//! identity plus half mean squared error for regression. Losses are means over samples.
//! Trained full-batch with Adam from a Glorot-uniform start.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::linear::softplus;
use super::Task;
use crate::error::ModelError;
use crate::features::{DesignMatrix, Scaling};
use crate::synthgen::sigmoid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MlpParams {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub epochs: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for MlpParams {
    fn default() -> Self {
        MlpParams {
            hidden: vec![16, 4],
            learning_rate: 0.01,
            epochs: 500,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    /// `weights[out][in]`.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
}

impl DenseLayer {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        DenseLayer {
            weights: vec![vec![0.0; inputs]; outputs],
            biases: vec![0.0; outputs],
        }
    }

    fn inputs(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    fn outputs(&self) -> usize {
        self.biases.len()
    }
}

/// Network parameters; also used as the container for their gradient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<DenseLayer>,
}

impl Mlp {
    pub fn zeros(inputs: usize, hidden: &[usize]) -> Self {
        let mut sizes = vec![inputs];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        Mlp {
            layers: sizes.windows(2).map(|w| DenseLayer::zeros(w[0], w[1])).collect(),
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn glorot<R: Rng>(inputs: usize, hidden: &[usize], rng: &mut R) -> Self {
        let mut net = Mlp::zeros(inputs, hidden);
        for layer in &mut net.layers {
            let limit = (6.0 / (layer.inputs() + layer.outputs()) as f64).sqrt();
            for row in &mut layer.weights {
                for w in row.iter_mut() {
                    *w = rng.random_range(-limit..limit);
                }
            }
        }
        net
    }

    pub fn n_inputs(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.outputs() * (l.inputs() + 1)).sum()
    }

    /// Parameters in layer order: each layer's weights row by row, then its biases.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            for row in &l.weights {
                out.extend_from_slice(row);
            }
            out.extend_from_slice(&l.biases);
        }
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.n_params(), "parameter vector length");
        let mut k = 0;
        for l in &mut self.layers {
            for row in &mut l.weights {
                let len = row.len();
                row.copy_from_slice(&flat[k..k + len]);
                k += len;
            }
            let len = l.biases.len();
            l.biases.copy_from_slice(&flat[k..k + len]);
            k += len;
        }
    }

    /// Pre-activation of the output unit.
    pub fn output(&self, x: &[f64]) -> f64 {
        let mut act = x.to_vec();
        let last = self.layers.len() - 1;
        for (li, layer) in self.layers.iter().enumerate() {
            act = layer
                .weights
                .iter()
                .zip(&layer.biases)
                .map(|(row, b)| {
                    let z = b + row.iter().zip(&act).map(|(w, a)| w * a).sum::<f64>();
                    if li == last {
                        z
                    } else {
                        z.max(0.0)
                    }
                })
                .collect();
        }
        act[0]
    }

    pub fn predict(&self, x: &[f64], task: Task) -> f64 {
        let z = self.output(x);
        match task {
            Task::Classify => sigmoid(z),
            Task::Regress => z,
        }
    }

    pub fn loss(&self, x: &DesignMatrix, y: &[f64], task: Task) -> f64 {
        let total: f64 = x
            .rows()
            .zip(y)
            .map(|(row, &t)| sample_loss(self.output(row), t, task))
            .sum();
        total / x.n_rows() as f64
    }

    /// Mean loss and its exact gradient by backpropagation.
    pub fn loss_and_gradient(&self, x: &DesignMatrix, y: &[f64], task: Task) -> (f64, Mlp) {
        let n = x.n_rows();
        let inv_n = 1.0 / n as f64;
        let mut grad = Mlp {
            layers: self
                .layers
                .iter()
                .map(|l| DenseLayer::zeros(l.inputs(), l.outputs()))
                .collect(),
        };
        let depth = self.layers.len();
        // acts[0] is the input, acts[l+1] the output of layer l (post-ReLU for hidden layers)
        let mut acts: Vec<Vec<f64>> = std::iter::once(vec![0.0; self.n_inputs()])
            .chain(self.layers.iter().map(|l| vec![0.0; l.outputs()]))
            .collect();
        let mut deltas: Vec<Vec<f64>> = self.layers.iter().map(|l| vec![0.0; l.outputs()]).collect();
        let mut total = 0.0;

        for (row, &target) in x.rows().zip(y) {
            acts[0].copy_from_slice(row);
            for (li, layer) in self.layers.iter().enumerate() {
                let (prev, rest) = acts.split_at_mut(li + 1);
                let input = &prev[li];
                for (o, (w, b)) in rest[0].iter_mut().zip(layer.weights.iter().zip(&layer.biases)) {
                    let z = b + w.iter().zip(input).map(|(a, c)| a * c).sum::<f64>();
                    *o = if li + 1 == depth { z } else { z.max(0.0) };
                }
            }
            let z = acts[depth][0];
            total += sample_loss(z, target, task);
            deltas[depth - 1][0] = match task {
                Task::Classify => sigmoid(z) - target,
                Task::Regress => z - target,
            } * inv_n;

            for li in (0..depth).rev() {
                if li + 1 < depth {
                    let (lower, upper) = deltas.split_at_mut(li + 1);
                    let next = &self.layers[li + 1];
                    for (j, d) in lower[li].iter_mut().enumerate() {
                        let back: f64 = next.weights.iter().zip(&upper[0]).map(|(w, dn)| w[j] * dn).sum();
                        // ReLU'(z) = 1 iff z > 0, and the stored activation is positive exactly then
                        *d = if acts[li + 1][j] > 0.0 { back } else { 0.0 };
                    }
                }
                let g = &mut grad.layers[li];
                for (o, &d) in deltas[li].iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    g.biases[o] += d;
                    for (gw, a) in g.weights[o].iter_mut().zip(&acts[li]) {
                        *gw += d * a;
                    }
                }
            }
        }
        (total * inv_n, grad)
    }
}

fn sample_loss(z: f64, target: f64, task: Task) -> f64 {
    match task {
        Task::Classify => softplus(z) - target * z,
        Task::Regress => 0.5 * (z - target).powi(2),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub network: Mlp,
    /// Regression targets are standardized for training; predictions are
    /// mapped back with these parameters.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_scaling: Option<Scaling>,
}

impl MlpModel {
    pub fn predict_row(&self, row: &[f64], task: Task) -> f64 {
        let p = self.network.predict(row, task);
        match self.target_scaling {
            Some(s) => s.mean + s.sd * p,
            None => p,
        }
    }

    pub(crate) fn scaled_targets(&self, y: &[f64]) -> Vec<f64> {
        match self.target_scaling {
            Some(s) => y.iter().map(|v| (v - s.mean) / s.sd).collect(),
            None => y.to_vec(),
        }
    }
}

pub(crate) struct MlpFit {
    pub model: MlpModel,
    pub epochs: usize,
    pub final_loss: f64,
}

pub(crate) fn fit(
    x: &DesignMatrix,
    y: &[f64],
    task: Task,
    params: &MlpParams,
    seed: u64,
) -> Result<MlpFit, ModelError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let network = Mlp::glorot(x.n_cols(), &params.hidden, &mut rng);
    let target_scaling = match task {
        Task::Classify => None,
        Task::Regress => {
            let n = y.len() as f64;
            let mean = y.iter().sum::<f64>() / n;
            let sd = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            Some(Scaling {
                mean,
                sd: if sd > 0.0 { sd } else { 1.0 },
            })
        }
    };
    let mut model = MlpModel {
        network,
        target_scaling,
    };
    let targets = model.scaled_targets(y);
    // Start the output at the base-rate log-odds; otherwise a skewed class
    // balance drives the first Adam steps to switch off the small last layer.
    if task == Task::Classify {
        let rate = (targets.iter().sum::<f64>() / targets.len() as f64).clamp(1e-3, 1.0 - 1e-3);
        let last = model.network.layers.len() - 1;
        model.network.layers[last].biases[0] = (rate / (1.0 - rate)).ln();
    }

    let mut theta = model.network.flatten();
    let mut m = vec![0.0; theta.len()];
    let mut v = vec![0.0; theta.len()];
    let mut last = f64::NAN;
    for epoch in 0..params.epochs {
        let (loss, grad) = model.network.loss_and_gradient(x, &targets, task);
        if !loss.is_finite() {
            return Err(ModelError::Diverged {
                family: "mlp",
                iteration: epoch,
                loss,
            });
        }
        last = loss;
        let g = grad.flatten();
        let t = (epoch + 1) as i32;
        let c1 = 1.0 - params.beta1.powi(t);
        let c2 = 1.0 - params.beta2.powi(t);
        for k in 0..theta.len() {
            m[k] = params.beta1 * m[k] + (1.0 - params.beta1) * g[k];
            v[k] = params.beta2 * v[k] + (1.0 - params.beta2) * g[k] * g[k];
            theta[k] -= params.learning_rate * (m[k] / c1) / ((v[k] / c2).sqrt() + params.epsilon);
        }
        model.network.set_flat(&theta);
    }
    if theta.iter().any(|p| !p.is_finite()) {
        return Err(ModelError::Diverged {
            family: "mlp",
            iteration: params.epochs,
            loss: f64::NAN,
        });
    }
    if params.epochs > 0 {
        last = model.network.loss(x, &targets, task);
    }
    Ok(MlpFit {
        model,
        epochs: params.epochs,
        final_loss: last,
    })
}
