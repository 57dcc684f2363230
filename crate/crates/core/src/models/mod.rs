//! The four model families behind a common train / predict surface.

pub mod forest;
pub mod linear;
pub mod mlp;
mod persist;
pub mod svm;
pub mod tree;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::domain::Feature;
use crate::error::ModelError;
use crate::features::{ColumnMeta, DesignMatrix};
use crate::synthgen::sigmoid;

pub use forest::{ForestParams, RandomForest};
pub use linear::{LinearModel, LinearParams};
pub use mlp::{DenseLayer, Mlp, MlpModel, MlpParams};
pub use persist::{load_model, save_model, FORMAT_VERSION};
pub use svm::SvmParams;
pub use tree::{DecisionTree, Node};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    #[serde(alias = "lr")]
    LogisticOrLinear,
    #[serde(alias = "svm")]
    SvmLinear,
    #[serde(alias = "rf")]
    RandomForest,
    Mlp,
}

impl ModelFamily {
    pub const ALL: [ModelFamily; 4] = [
        ModelFamily::LogisticOrLinear,
        ModelFamily::SvmLinear,
        ModelFamily::RandomForest,
        ModelFamily::Mlp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelFamily::LogisticOrLinear => "logistic_or_linear",
            ModelFamily::SvmLinear => "svm_linear",
            ModelFamily::RandomForest => "random_forest",
            ModelFamily::Mlp => "mlp",
        }
    }

    /// Short label used in file names and tables.
    pub fn short(self) -> &'static str {
        match self {
            ModelFamily::LogisticOrLinear => "lr",
            ModelFamily::SvmLinear => "svm",
            ModelFamily::RandomForest => "rf",
            ModelFamily::Mlp => "mlp",
        }
    }
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short())
    }
}

impl FromStr for ModelFamily {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelFamily::ALL
            .into_iter()
            .find(|f| f.name() == s || f.short() == s)
            .ok_or_else(|| ModelError::InvalidSpec(format!("unknown model family `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Classify,
    Regress,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Hyperparams {
    LogisticOrLinear(LinearParams),
    SvmLinear(SvmParams),
    RandomForest(ForestParams),
    Mlp(MlpParams),
}

impl Hyperparams {
    pub fn defaults(family: ModelFamily) -> Self {
        match family {
            ModelFamily::LogisticOrLinear => Hyperparams::LogisticOrLinear(LinearParams::default()),
            ModelFamily::SvmLinear => Hyperparams::SvmLinear(SvmParams::default()),
            ModelFamily::RandomForest => Hyperparams::RandomForest(ForestParams::default()),
            ModelFamily::Mlp => Hyperparams::Mlp(MlpParams::default()),
        }
    }

    pub fn family(&self) -> ModelFamily {
        match self {
            Hyperparams::LogisticOrLinear(_) => ModelFamily::LogisticOrLinear,
            Hyperparams::SvmLinear(_) => ModelFamily::SvmLinear,
            Hyperparams::RandomForest(_) => ModelFamily::RandomForest,
            Hyperparams::Mlp(_) => ModelFamily::Mlp,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub task: Task,
    pub hyperparams: Hyperparams,
    pub seed: u64,
}

impl ModelSpec {
    pub fn new(family: ModelFamily, task: Task, seed: u64) -> Self {
        ModelSpec {
            task,
            hyperparams: Hyperparams::defaults(family),
            seed,
        }
    }

    pub fn family(&self) -> ModelFamily {
        self.hyperparams.family()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        match &self.hyperparams {
            Hyperparams::SvmLinear(p) => {
                if self.task != Task::Classify {
                    return Err(ModelError::InvalidSpec(
                        "svm_linear supports classification only".into(),
                    ));
                }
                if !(p.c > 0.0 && p.c.is_finite()) {
                    return Err(ModelError::InvalidSpec(format!("svm C must be > 0, got {}", p.c)));
                }
            }
            Hyperparams::RandomForest(p) => {
                if p.n_estimators == 0 || p.max_depth == 0 {
                    return Err(ModelError::InvalidSpec(
                        "random forest needs n_estimators >= 1 and max_depth >= 1".into(),
                    ));
                }
                if p.max_features == Some(0) {
                    return Err(ModelError::InvalidSpec("max_features must be >= 1".into()));
                }
            }
            Hyperparams::Mlp(p) => {
                if p.hidden.contains(&0) {
                    return Err(ModelError::InvalidSpec("mlp hidden sizes must all be >= 1".into()));
                }
                if p.learning_rate.is_nan() || p.learning_rate <= 0.0 {
                    return Err(ModelError::InvalidSpec("mlp learning rate must be > 0".into()));
                }
            }
            Hyperparams::LogisticOrLinear(p) => {
                if p.learning_rate.is_nan() || p.learning_rate <= 0.0 || p.l2 < 0.0 {
                    return Err(ModelError::InvalidSpec(
                        "linear model needs learning_rate > 0 and l2 >= 0".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelParams {
    Linear(LinearModel),
    Svm(LinearModel),
    Forest(RandomForest),
    Mlp(MlpModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    /// Iterations (linear), epochs (SVM, MLP) or trees (forest).
    pub iterations: usize,
    /// Final training objective; `None` for forests.
    pub final_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub spec: ModelSpec,
    pub columns: Vec<ColumnMeta>,
    pub parameters: ModelParams,
    pub metadata: TrainingMetadata,
}

fn check_targets(x: &DesignMatrix, y: &[f64], task: Task) -> Result<(), ModelError> {
    if x.n_rows() == 0 || x.n_cols() == 0 {
        return Err(ModelError::EmptyData);
    }
    if y.len() != x.n_rows() {
        return Err(ModelError::TargetLength {
            rows: x.n_rows(),
            targets: y.len(),
        });
    }
    match task {
        Task::Classify => {
            if let Some(bad) = y.iter().find(|v| **v != 0.0 && **v != 1.0) {
                return Err(ModelError::BadLabel(*bad));
            }
        }
        Task::Regress => {
            if let Some(bad) = y.iter().find(|v| !v.is_finite()) {
                return Err(ModelError::InvalidSpec(format!("non-finite regression target {bad}")));
            }
        }
    }
    Ok(())
}

/// Fits a model. Classification targets are 0/1. Linear, SVM and MLP
/// families expect standardized inputs.
pub fn train(spec: &ModelSpec, x: &DesignMatrix, y: &[f64]) -> Result<TrainedModel, ModelError> {
    spec.validate()?;
    check_targets(x, y, spec.task)?;
    let classify = spec.task == Task::Classify;
    let (parameters, metadata) = match &spec.hyperparams {
        Hyperparams::LogisticOrLinear(p) => {
            let loss = if classify {
                linear::LinearLoss::Logistic
            } else {
                linear::LinearLoss::Squared
            };
            let out = linear::fit(x, y, p, loss)?;
            (
                ModelParams::Linear(out.model),
                TrainingMetadata {
                    iterations: out.iterations,
                    final_loss: Some(out.final_loss),
                },
            )
        }
        Hyperparams::SvmLinear(p) => {
            let out = svm::fit(x, y, p, spec.seed)?;
            (
                ModelParams::Svm(out.model),
                TrainingMetadata {
                    iterations: out.epochs,
                    final_loss: Some(out.objective),
                },
            )
        }
        Hyperparams::RandomForest(p) => {
            let forest = RandomForest::fit(x, y, p, classify, spec.seed);
            (
                ModelParams::Forest(forest),
                TrainingMetadata {
                    iterations: p.n_estimators,
                    final_loss: None,
                },
            )
        }
        Hyperparams::Mlp(p) => {
            let out = mlp::fit(x, y, spec.task, p, spec.seed)?;
            (
                ModelParams::Mlp(out.model),
                TrainingMetadata {
                    iterations: out.epochs,
                    final_loss: Some(out.final_loss),
                },
            )
        }
    };
    Ok(TrainedModel {
        spec: spec.clone(),
        columns: x.columns().to_vec(),
        parameters,
        metadata,
    })
}

impl TrainedModel {
    pub fn family(&self) -> ModelFamily {
        self.spec.family()
    }

    fn check_columns(&self, x: &DesignMatrix) -> Result<(), ModelError> {
        if x.columns() != self.columns.as_slice() {
            let expected: Vec<String> = self.columns.iter().map(|c| c.to_string()).collect();
            let found: Vec<String> = x.columns().iter().map(|c| c.to_string()).collect();
            return Err(ModelError::Shape(format!(
                "model trained on [{}], got [{}]",
                expected.join(", "),
                found.join(", ")
            )));
        }
        Ok(())
    }

    fn score_row(&self, row: &[f64]) -> f64 {
        let classify = self.spec.task == Task::Classify;
        match &self.parameters {
            ModelParams::Linear(m) => {
                let z = m.decision(row);
                if classify {
                    sigmoid(z)
                } else {
                    z
                }
            }
            // squashed margin: monotone in w·x + b, 0.5 exactly on the hyperplane
            ModelParams::Svm(m) => sigmoid(m.decision(row)),
            ModelParams::Forest(f) => f.predict_row(row),
            ModelParams::Mlp(m) => m.predict_row(row, self.spec.task),
        }
    }
}

/// P(cross) for classifiers, the predicted value for regressors.
pub fn predict(model: &TrainedModel, x: &DesignMatrix) -> Result<Vec<f64>, ModelError> {
    model.check_columns(x)?;
    Ok(x.rows().map(|row| model.score_row(row)).collect())
}

/// Hard labels: 1 iff score > threshold (a tie goes to 0, "wait").
pub fn classify(model: &TrainedModel, x: &DesignMatrix, threshold: f64) -> Result<Vec<bool>, ModelError> {
    if model.spec.task != Task::Classify {
        return Err(ModelError::InvalidSpec("classify needs a classification model".into()));
    }
    Ok(predict(model, x)?.into_iter().map(|s| s > threshold).collect())
}

/// Gradient of the training loss of an MLP with respect to every
/// parameter, in the layout of [`Mlp`]. Regression targets are scaled the
/// same way training scales them.
pub fn mlp_gradient(model: &TrainedModel, x: &DesignMatrix, y: &[f64]) -> Result<Mlp, ModelError> {
    model.check_columns(x)?;
    check_targets(x, y, model.spec.task)?;
    match &model.parameters {
        ModelParams::Mlp(m) => {
            let targets = m.scaled_targets(y);
            Ok(m.network.loss_and_gradient(x, &targets, model.spec.task).1)
        }
        _ => Err(ModelError::InvalidSpec(format!(
            "mlp_gradient needs an mlp, got {}",
            model.family().name()
        ))),
    }
}

/// Importance per source feature, as shares summing to 1, sorted from most
/// to least important (ties keep column order).
///
/// Linear and SVM models use `|weight|` on standardized inputs, taking the
/// largest weight within a one-hot group. Forests use mean decrease in
/// impurity summed over a feature's columns. MLPs are not supported.
pub fn feature_importance(model: &TrainedModel) -> Result<Vec<(Feature, f64)>, ModelError> {
    let mut per_feature: Vec<(Feature, f64)> = Vec::new();
    let mut push = |feature: Feature, v: f64, combine: fn(f64, f64) -> f64| match per_feature
        .iter_mut()
        .find(|(f, _)| *f == feature)
    {
        Some((_, acc)) => *acc = combine(*acc, v),
        None => per_feature.push((feature, v)),
    };
    match &model.parameters {
        ModelParams::Linear(m) | ModelParams::Svm(m) => {
            for (c, w) in model.columns.iter().zip(&m.weights) {
                push(c.feature, w.abs(), f64::max);
            }
        }
        ModelParams::Forest(f) => {
            for (c, v) in model.columns.iter().zip(&f.column_importance) {
                push(c.feature, *v, |a, b| a + b);
            }
        }
        ModelParams::Mlp(_) => return Err(ModelError::UnsupportedFamily("mlp")),
    }
    let total: f64 = per_feature.iter().map(|(_, v)| v).sum();
    if total > 0.0 {
        per_feature.iter_mut().for_each(|(_, v)| *v /= total);
    }
    per_feature.sort_by(|a, b| b.1.total_cmp(&a.1));
    Ok(per_feature)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Feature;
    use crate::features::Scaling;

    fn matrix(rows: &[Vec<f64>]) -> DesignMatrix {
        let feats = [Feature::Tta, Feature::WaitingTime, Feature::DriverAge];
        DesignMatrix::from_rows(rows, &feats[..rows[0].len()]).unwrap()
    }

    fn zero_logistic(d: usize) -> TrainedModel {
        let x = matrix(&[vec![0.0; d]]);
        TrainedModel {
            spec: ModelSpec::new(ModelFamily::LogisticOrLinear, Task::Classify, 0),
            columns: x.columns().to_vec(),
            parameters: ModelParams::Linear(LinearModel::zeros(d)),
            metadata: TrainingMetadata {
                iterations: 0,
                final_loss: None,
            },
        }
    }

    #[test]
    fn zero_logistic_predicts_half_and_waits() {
        let model = zero_logistic(2);
        let x = matrix(&[vec![1.0, -3.0], vec![100.0, 2.0], vec![0.0, 0.0]]);
        assert!(predict(&model, &x).unwrap().iter().all(|p| *p == 0.5));
        assert!(classify(&model, &x, 0.5).unwrap().iter().all(|l| !l));
    }

    #[test]
    fn threshold_tie_rule() {
        let mut model = zero_logistic(1);
        let x = matrix(&[vec![0.0]]);
        assert_eq!(classify(&model, &x, 0.5).unwrap(), vec![false]);
        // sigmoid(b) = 0.51
        model.parameters = ModelParams::Linear(LinearModel {
            weights: vec![0.0],
            bias: (0.51f64 / 0.49).ln(),
        });
        assert_eq!(classify(&model, &x, 0.5).unwrap(), vec![true]);
    }

    #[test]
    fn column_mismatch_is_rejected() {
        let model = zero_logistic(2);
        let x = matrix(&[vec![1.0, 2.0, 3.0]]);
        assert!(matches!(predict(&model, &x), Err(ModelError::Shape(_))));
        let mut scaled = model.columns.clone();
        scaled[0].scaling = Some(Scaling { mean: 1.0, sd: 2.0 });
        let x = DesignMatrix::from_parts(vec![0.0, 0.0], scaled, vec![0]).unwrap();
        assert!(matches!(predict(&model, &x), Err(ModelError::Shape(_))));
    }

    #[test]
    fn spec_validation() {
        assert!(ModelSpec::new(ModelFamily::SvmLinear, Task::Regress, 0)
            .validate()
            .is_err());
        let mut spec = ModelSpec::new(ModelFamily::RandomForest, Task::Classify, 0);
        if let Hyperparams::RandomForest(p) = &mut spec.hyperparams {
            p.max_depth = 0;
        }
        assert!(spec.validate().is_err());
        let mut spec = ModelSpec::new(ModelFamily::Mlp, Task::Classify, 0);
        if let Hyperparams::Mlp(p) = &mut spec.hyperparams {
            p.hidden = vec![16, 0];
        }
        assert!(spec.validate().is_err());
    }

    #[test]
    fn bad_training_inputs() {
        let spec = ModelSpec::new(ModelFamily::LogisticOrLinear, Task::Classify, 0);
        let x = matrix(&[vec![1.0], vec![2.0]]);
        assert!(matches!(train(&spec, &x, &[1.0]), Err(ModelError::TargetLength { .. })));
        assert!(matches!(train(&spec, &x, &[1.0, 2.0]), Err(ModelError::BadLabel(_))));
        let empty = DesignMatrix::from_parts(vec![], x.columns().to_vec(), vec![]).unwrap();
        assert!(matches!(train(&spec, &empty, &[]), Err(ModelError::EmptyData)));
    }

    #[test]
    fn importance_aggregates_one_hot_by_max() {
        let cols = vec![
            ColumnMeta {
                feature: Feature::Tta,
                category: None,
                scaling: None,
            },
            ColumnMeta {
                feature: Feature::Location,
                category: Some("zebra".into()),
                scaling: None,
            },
            ColumnMeta {
                feature: Feature::Location,
                category: Some("non_zebra".into()),
                scaling: None,
            },
        ];
        let mut model = zero_logistic(1);
        model.columns = cols;
        model.parameters = ModelParams::Linear(LinearModel {
            weights: vec![1.0, -3.0, 2.0],
            bias: 0.0,
        });
        let imp = feature_importance(&model).unwrap();
        assert_eq!(imp, vec![(Feature::Location, 0.75), (Feature::Tta, 0.25)]);
    }

    #[test]
    fn mlp_importance_is_unsupported() {
        let x = matrix(&[vec![0.0], vec![1.0]]);
        let mut spec = ModelSpec::new(ModelFamily::Mlp, Task::Classify, 0);
        if let Hyperparams::Mlp(p) = &mut spec.hyperparams {
            p.epochs = 1;
        }
        let model = train(&spec, &x, &[0.0, 1.0]).unwrap();
        assert!(matches!(
            feature_importance(&model),
            Err(ModelError::UnsupportedFamily("mlp"))
        ));
    }
}
