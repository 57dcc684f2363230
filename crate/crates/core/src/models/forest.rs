//! Bagged CART forest. Tree `i` draws its bootstrap sample and split
//! candidates from its own RNG seeded with `seed + i`, so trees can be grown
//! in parallel without changing the result.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{Criterion, DecisionTree, TreeConfig};
use crate::features::DesignMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForestParams {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Columns examined per split. Defaults to `⌈√d⌉` for classification
    /// and `⌈d/3⌉` for regression.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_features: Option<usize>,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_estimators: 100,
            max_depth: 5,
            min_samples_leaf: 1,
            max_features: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub trees: Vec<DecisionTree>,
    /// Normalized mean decrease in impurity per design-matrix column.
    pub column_importance: Vec<f64>,
}

pub(crate) fn default_max_features(d: usize, classification: bool) -> usize {
    let m = if classification {
        (d as f64).sqrt().ceil() as usize
    } else {
        d.div_ceil(3)
    };
    m.clamp(1, d.max(1))
}

impl RandomForest {
    pub(crate) fn fit(x: &DesignMatrix, y: &[f64], params: &ForestParams, classification: bool, seed: u64) -> Self {
        let n = x.n_rows();
        let d = x.n_cols();
        let cfg = TreeConfig {
            criterion: if classification {
                Criterion::Gini
            } else {
                Criterion::Variance
            },
            max_depth: params.max_depth,
            min_samples_leaf: params.min_samples_leaf.max(1),
            max_features: params
                .max_features
                .unwrap_or_else(|| default_max_features(d, classification))
                .clamp(1, d.max(1)),
        };
        let grown: Vec<(DecisionTree, Vec<f64>)> = (0..params.n_estimators)
            .into_par_iter()
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
                let samples: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                DecisionTree::grow(x, y, samples, &cfg, &mut rng)
            })
            .collect();

        let mut importance = vec![0.0; d];
        let mut trees = Vec::with_capacity(grown.len());
        for (tree, decrease) in grown {
            let total: f64 = decrease.iter().sum();
            if total > 0.0 {
                for (acc, v) in importance.iter_mut().zip(&decrease) {
                    *acc += v / total;
                }
            }
            trees.push(tree);
        }
        let total: f64 = importance.iter().sum();
        if total > 0.0 {
            importance.iter_mut().for_each(|v| *v /= total);
        }
        RandomForest {
            trees,
            column_importance: importance,
        }
    }

    /// Mean over trees of the leaf value: `P(1)` for classification,
    /// the regression mean otherwise.
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let sum: f64 = self
            .trees
            .iter()
            .map(|t| {
                let v = t.leaf_value(row);
                *v.last().expect("leaf values are never empty")
            })
            .sum();
        sum / self.trees.len() as f64
    }
}
