use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DomainError {
    #[error("unknown {field} category `{value}`")]
    UnknownCategory { field: &'static str, value: String },
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
    #[error("unknown feature set `{0}`")]
    UnknownFeatureSet(String),
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid configuration field `{field}`: {reason}")]
    InvalidField { field: String, reason: String },
    #[error("cannot parse configuration {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("truncated-normal sampling for `{field}` did not accept a draw after {attempts} attempts")]
    RejectionExhausted { field: String, attempts: usize },
}

impl ConfigError {
    pub fn field(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ConfigError::InvalidField {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum EncodeError {
    #[error("unseen category `{category}` for feature {feature}")]
    UnknownCategory { feature: String, category: String },
    #[error("non-finite value in column {column} of row {row}")]
    NonFinite { row: usize, column: String },
    #[error("column layout mismatch: {0}")]
    Shape(String),
    #[error("no rows to fit on")]
    Empty,
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model spec: {0}")]
    InvalidSpec(String),
    #[error("empty training data")]
    EmptyData,
    #[error("target length {targets} does not match {rows} rows")]
    TargetLength { rows: usize, targets: usize },
    #[error("classification targets must be 0 or 1, found {0}")]
    BadLabel(f64),
    #[error("training diverged for {family} at iteration {iteration}: loss {loss}")]
    Diverged {
        family: &'static str,
        iteration: usize,
        loss: f64,
    },
    #[error("column layout mismatch: {0}")]
    Shape(String),
    #[error("feature importance is not available for the {0} family")]
    UnsupportedFamily(&'static str),
    #[error("model file format version {found} is newer than supported version {supported}")]
    Version { found: u64, supported: u64 },
    #[error("corrupt model file: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("metric input is empty")]
    Empty,
    #[error("length mismatch: {truth} truth values vs {predicted} predictions")]
    Length { truth: usize, predicted: usize },
    #[error("cannot split {n} items into {k} folds")]
    Folds { n: usize, k: usize },
    #[error("trial {0} has no value for the requested target")]
    MissingTarget(usize),
    #[error("fold plan covers {plan} trials but {trials} were given")]
    PlanSize { plan: usize, trials: usize },
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{}: {source}", path.display())]
    File { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("figure data: {0}")]
    Figure(String),
    #[error("invalid plan: {0}")]
    Plan(String),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
