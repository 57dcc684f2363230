//! k-fold cross-validation, the four metrics, and reports stratified by
//! crossing location and TTA level.
//!
//! Per fold: the standardizer is fitted on the training rows only, the model
//! is trained on those rows and scores the held-out rows. The headline
//! numbers are unweighted means of per-fold test metrics; strata are
//! computed on the pooled out-of-fold predictions.

mod folds;
mod metrics;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{FeatureSet, Location, Trial};
use crate::error::EvalError;
use crate::features::{encode, DesignMatrix, Standardizer};
use crate::models::{predict, train, ModelFamily, ModelSpec, Task, TrainedModel};

pub use folds::{make_folds, make_group_folds, FoldPlan};
pub use metrics::{accuracy, confusion, f1, mae, rmse};

/// Outcome variable being predicted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Decision,
    Cit,
    Cd,
}

impl Target {
    pub const ALL: [Target; 3] = [Target::Decision, Target::Cit, Target::Cd];

    pub fn task(self) -> Task {
        match self {
            Target::Decision => Task::Classify,
            Target::Cit | Target::Cd => Task::Regress,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Target::Decision => "decision",
            Target::Cit => "cit",
            Target::Cd => "cd",
        }
    }

    /// Numeric target of a trial; crossing decisions map to 1/0.
    pub fn value(self, trial: &Trial) -> Option<f64> {
        match self {
            Target::Decision => Some(if trial.outcome.crossed { 1.0 } else { 0.0 }),
            Target::Cit => trial.outcome.cit,
            Target::Cd => trial.outcome.cd,
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Target {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Target::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| format!("unknown task `{s}` (expected decision, cit or cd)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Metrics {
    Classification { acc: f64, f1: f64 },
    Regression { mae: f64, rmse: f64 },
}

impl Metrics {
    pub fn compute(task: Task, truth: &[f64], scores: &[f64]) -> Result<Metrics, EvalError> {
        match task {
            Task::Classify => {
                let t: Vec<bool> = truth.iter().map(|v| *v > 0.5).collect();
                let p: Vec<bool> = scores.iter().map(|s| *s > 0.5).collect();
                Ok(Metrics::Classification {
                    acc: accuracy(&t, &p)?,
                    f1: f1(&t, &p)?,
                })
            }
            Task::Regress => Ok(Metrics::Regression {
                mae: mae(truth, scores)?,
                rmse: rmse(truth, scores)?,
            }),
        }
    }

    /// ACC for classification, RMSE for regression.
    pub fn primary(&self) -> f64 {
        match self {
            Metrics::Classification { acc, .. } => *acc,
            Metrics::Regression { rmse, .. } => *rmse,
        }
    }

    pub fn values(&self) -> [(&'static str, f64); 2] {
        match *self {
            Metrics::Classification { acc, f1 } => [("acc", acc), ("f1", f1)],
            Metrics::Regression { mae, rmse } => [("mae", mae), ("rmse", rmse)],
        }
    }

    fn mean(all: &[Metrics]) -> Metrics {
        let n = all.len() as f64;
        let sum = |k: usize| all.iter().map(|m| m.values()[k].1).sum::<f64>() / n;
        match all[0] {
            Metrics::Classification { .. } => Metrics::Classification {
                acc: sum(0),
                f1: sum(1),
            },
            Metrics::Regression { .. } => Metrics::Regression {
                mae: sum(0),
                rmse: sum(1),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    #[serde(flatten)]
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stratum {
    pub n: usize,
    /// Crossing trials among the stratum (classification only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positives: Option<usize>,
    #[serde(flatten)]
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Strata {
    pub zebra: Option<Stratum>,
    pub non_zebra: Option<Stratum>,
    pub total: Stratum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TtaStratum {
    pub tta: f64,
    #[serde(flatten)]
    pub stratum: Stratum,
}

/// One held-out prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct OutOfFold {
    /// Index into the evaluated trial list.
    pub trial: usize,
    pub fold: usize,
    pub truth: f64,
    pub score: f64,
    pub location: Location,
    pub tta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub task: Target,
    pub feature_set: FeatureSet,
    pub model: ModelFamily,
    pub k: usize,
    pub seed: u64,
    pub model_seed: u64,
    pub per_fold: Vec<FoldMetrics>,
    pub aggregate: Metrics,
    pub strata: Strata,
    pub by_tta: Vec<TtaStratum>,
    #[serde(skip)]
    pub predictions: Vec<OutOfFold>,
}

/// Everything produced while fitting a single fold.
#[derive(Debug, Clone)]
pub struct FoldFit {
    pub standardizer: Standardizer,
    pub model: TrainedModel,
    pub test_rows: Vec<usize>,
    pub test_scores: Vec<f64>,
}

/// Fits fold `fold`: the standardizer and model only ever see training rows.
pub fn fit_fold(
    matrix: &DesignMatrix,
    y: &[f64],
    spec: &ModelSpec,
    plan: &FoldPlan,
    fold: usize,
) -> Result<FoldFit, EvalError> {
    let train_rows = plan.train_rows(fold);
    let test_rows = plan.test_rows(fold);
    let standardizer = Standardizer::fit(matrix, &train_rows)?;
    let scaled = standardizer.apply(matrix)?;
    let x_train = scaled.select_rows(&train_rows);
    let y_train: Vec<f64> = train_rows.iter().map(|&i| y[i]).collect();
    if spec.task == Task::Classify {
        let positives = y_train.iter().filter(|v| **v > 0.5).count();
        if positives == 0 || positives == y_train.len() {
            log::warn!("fold {fold}: training labels contain a single class; the model may be degenerate");
        }
    }
    let model = train(spec, &x_train, &y_train)?;
    let test_scores = predict(&model, &scaled.select_rows(&test_rows))?;
    Ok(FoldFit {
        standardizer,
        model,
        test_rows,
        test_scores,
    })
}

fn stratum(task: Task, preds: &[&OutOfFold]) -> Result<Option<Stratum>, EvalError> {
    if preds.is_empty() {
        return Ok(None);
    }
    let truth: Vec<f64> = preds.iter().map(|p| p.truth).collect();
    let scores: Vec<f64> = preds.iter().map(|p| p.score).collect();
    Ok(Some(Stratum {
        n: preds.len(),
        positives: (task == Task::Classify).then(|| truth.iter().filter(|v| **v > 0.5).count()),
        metrics: Metrics::compute(task, &truth, &scores)?,
    }))
}

/// Extracts the numeric target for every trial.
pub fn targets(trials: &[Trial], target: Target) -> Result<Vec<f64>, EvalError> {
    trials
        .iter()
        .enumerate()
        .map(|(i, t)| target.value(t).ok_or(EvalError::MissingTarget(i)))
        .collect()
}

/// k-fold evaluation of one (feature set, model) cell. For CIT/CD the
/// trials must already be restricted to crossing trials.
pub fn cross_validate(
    trials: &[Trial],
    feature_set: FeatureSet,
    spec: &ModelSpec,
    target: Target,
    plan: &FoldPlan,
) -> Result<EvaluationReport, EvalError> {
    if plan.n() != trials.len() {
        return Err(EvalError::PlanSize {
            plan: plan.n(),
            trials: trials.len(),
        });
    }
    if spec.task != target.task() {
        return Err(EvalError::Model(crate::error::ModelError::InvalidSpec(format!(
            "{:?} model cannot predict {target}",
            spec.task
        ))));
    }
    let y = targets(trials, target)?;
    let matrix = encode(trials, feature_set)?;
    let fits: Vec<FoldFit> = (0..plan.k)
        .into_par_iter()
        .map(|fold| fit_fold(&matrix, &y, spec, plan, fold))
        .collect::<Result<_, _>>()?;

    let task = spec.task;
    let mut per_fold = Vec::with_capacity(plan.k);
    let mut predictions = Vec::with_capacity(trials.len());
    for (fold, fit) in fits.iter().enumerate() {
        let truth: Vec<f64> = fit.test_rows.iter().map(|&i| y[i]).collect();
        per_fold.push(FoldMetrics {
            fold,
            n_train: trials.len() - fit.test_rows.len(),
            n_test: fit.test_rows.len(),
            metrics: Metrics::compute(task, &truth, &fit.test_scores)?,
        });
        for (&i, &score) in fit.test_rows.iter().zip(&fit.test_scores) {
            predictions.push(OutOfFold {
                trial: i,
                fold,
                truth: y[i],
                score,
                location: trials[i].location,
                tta: trials[i].tta,
            });
        }
    }
    predictions.sort_by_key(|p| p.trial);
    let aggregate = Metrics::mean(&per_fold.iter().map(|f| f.metrics).collect::<Vec<_>>());

    let all: Vec<&OutOfFold> = predictions.iter().collect();
    let of_location = |loc: Location| -> Vec<&OutOfFold> { predictions.iter().filter(|p| p.location == loc).collect() };
    let strata = Strata {
        zebra: stratum(task, &of_location(Location::Zebra))?,
        non_zebra: stratum(task, &of_location(Location::NonZebra))?,
        total: stratum(task, &all)?.expect("cross-validation always has predictions"),
    };

    let mut levels: Vec<f64> = predictions.iter().map(|p| p.tta).collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let mut by_tta = Vec::with_capacity(levels.len());
    for tta in levels {
        let rows: Vec<&OutOfFold> = predictions.iter().filter(|p| p.tta == tta).collect();
        if let Some(stratum) = stratum(task, &rows)? {
            by_tta.push(TtaStratum { tta, stratum });
        }
    }

    Ok(EvaluationReport {
        task: target,
        feature_set,
        model: spec.family(),
        k: plan.k,
        seed: plan.seed,
        model_seed: spec.seed,
        per_fold,
        aggregate,
        strata,
        by_tta,
        predictions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthgen::{generate_dataset, GeneratorConfig};

    fn small() -> Vec<Trial> {
        generate_dataset(&GeneratorConfig {
            n_pairs: 8,
            seed: 2,
            ..GeneratorConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn report_strata_partition_total() {
        let trials = small();
        let plan = make_folds(trials.len(), 5, 1).unwrap();
        let spec = ModelSpec::new(ModelFamily::LogisticOrLinear, Task::Classify, 0);
        let r = cross_validate(&trials, FeatureSet::Ours, &spec, Target::Decision, &plan).unwrap();
        let z = r.strata.zebra.as_ref().unwrap();
        let nz = r.strata.non_zebra.as_ref().unwrap();
        assert_eq!(z.n + nz.n, r.strata.total.n);
        assert_eq!(r.strata.total.n, trials.len());
        assert_eq!(r.by_tta.len(), 5);
        assert_eq!(r.by_tta.iter().map(|s| s.stratum.n).sum::<usize>(), trials.len());
        assert_eq!(r.per_fold.len(), 5);
        let accs: Vec<f64> = r.per_fold.iter().map(|f| f.metrics.primary()).collect();
        let lo = accs.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = accs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(r.aggregate.primary() >= lo && r.aggregate.primary() <= hi);
    }

    #[test]
    fn regression_requires_crossing_trials() {
        let trials = small();
        let plan = make_folds(trials.len(), 5, 1).unwrap();
        let spec = ModelSpec::new(ModelFamily::LogisticOrLinear, Task::Regress, 0);
        assert!(matches!(
            cross_validate(&trials, FeatureSet::Ours, &spec, Target::Cit, &plan),
            Err(EvalError::MissingTarget(_))
        ));
    }

    #[test]
    fn task_and_target_must_agree() {
        let trials = small();
        let plan = make_folds(trials.len(), 5, 1).unwrap();
        let spec = ModelSpec::new(ModelFamily::LogisticOrLinear, Task::Regress, 0);
        assert!(cross_validate(&trials, FeatureSet::Ours, &spec, Target::Decision, &plan).is_err());
        let short = make_folds(10, 5, 1).unwrap();
        let spec = ModelSpec::new(ModelFamily::LogisticOrLinear, Task::Classify, 0);
        assert!(matches!(
            cross_validate(&trials, FeatureSet::Ours, &spec, Target::Decision, &short),
            Err(EvalError::PlanSize { .. })
        ));
    }

    #[test]
    fn report_json_shape() {
        let trials = small();
        let plan = make_folds(trials.len(), 5, 1).unwrap();
        let spec = ModelSpec::new(ModelFamily::LogisticOrLinear, Task::Classify, 0);
        let r = cross_validate(&trials, FeatureSet::Subset4, &spec, Target::Decision, &plan).unwrap();
        let v = serde_json::to_value(&r).unwrap();
        for key in [
            "task",
            "feature_set",
            "model",
            "k",
            "seed",
            "per_fold",
            "aggregate",
            "strata",
            "by_tta",
        ] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["task"], "decision");
        assert_eq!(v["model"], "logistic_or_linear");
        assert!(v["aggregate"]["acc"].is_f64());
        assert!(v["strata"]["zebra"]["f1"].is_f64());
        assert!(v["by_tta"][0]["tta"].is_f64());
        let back: EvaluationReport = serde_json::from_value(v).unwrap();
        assert_eq!(back.aggregate, r.aggregate);
        assert_eq!(back.strata, r.strata);
    }
}
