//! Prediction of pedestrian behavior at unsignalized crossings: the crossing
//! decision (classification), crossing initiation time and crossing duration
//! (regression).
//!
//! The crate covers the whole pipeline: a synthetic generator for
//! driver/pedestrian study data ([`synthgen`]), design-matrix encoding
//! ([`features`]), four model families written from scratch ([`models`]),
//! k-fold cross-validated evaluation ([`evaluation`]) and the experiment
//! grid with feature-subset ablation ([`experiments`]).

pub mod domain;
pub mod error;
pub mod evaluation;
pub mod experiments;
pub mod features;
pub mod io;
pub mod models;
pub mod synthgen;

pub use domain::{Feature, FeatureSet, Location, Trial};
pub use error::{ConfigError, DataError, EncodeError, EvalError, ExperimentError, ModelError};
