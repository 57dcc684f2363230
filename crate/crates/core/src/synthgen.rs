//! Synthetic stand-in for the distributed simulator study.
//!
//! The experimental design is reproduced exactly: every participant pair
//! sees each (TTA, crossing site) condition once per block, in a seeded
//! random order. Outcomes come from a configurable ground-truth behavior
//! model, so any accuracy measured on generated data is relative to that
//! model.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::domain::{Gender, Location, Outcome, Participant, Role, Trial, MAX_AGE, MIN_AGE};
use crate::error::ConfigError;

const MAX_REJECTIONS: usize = 100_000;

/// Normal distribution restricted to `[low, high]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncatedNormal {
    pub mean: f64,
    pub sd: f64,
    pub low: f64,
    pub high: f64,
}

impl TruncatedNormal {
    pub const fn new(mean: f64, sd: f64, low: f64, high: f64) -> Self {
        TruncatedNormal { mean, sd, low, high }
    }

    fn validate(&self, field: &str) -> Result<(), ConfigError> {
        if !(self.mean.is_finite() && self.sd.is_finite()) {
            return Err(ConfigError::field(field, "mean and sd must be finite"));
        }
        if self.sd <= 0.0 {
            return Err(ConfigError::field(field, format!("sd must be > 0, got {}", self.sd)));
        }
        if self.low.is_nan() || self.high.is_nan() || self.low >= self.high {
            return Err(ConfigError::field(
                field,
                format!("bounds must satisfy low < high, got [{}, {}]", self.low, self.high),
            ));
        }
        Ok(())
    }

    /// Rejection sampling from the untruncated normal.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, field: &str) -> Result<f64, ConfigError> {
        sample_truncated(rng, self.mean, self.sd, self.low, self.high, field)
    }
}

fn sample_truncated<R: Rng + ?Sized>(
    rng: &mut R,
    mean: f64,
    sd: f64,
    low: f64,
    high: f64,
    field: &str,
) -> Result<f64, ConfigError> {
    for _ in 0..MAX_REJECTIONS {
        let z: f64 = StandardNormal.sample(rng);
        let x = mean + sd * z;
        if x >= low && x <= high {
            return Ok(x);
        }
    }
    Err(ConfigError::RejectionExhausted {
        field: field.to_string(),
        attempts: MAX_REJECTIONS,
    })
}

/// Covariates the behavior model reads for one trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTruthFeatures {
    pub tta: f64,
    pub zebra: bool,
    pub waiting_time_z: f64,
    pub ped_aiss_z: f64,
    pub dsvo_z: f64,
}

/// Coefficients of a linear predictor over [`GroundTruthFeatures`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Coefficients {
    pub intercept: f64,
    pub tta: f64,
    pub zebra: f64,
    pub waiting_time: f64,
    pub ped_aiss: f64,
    pub dsvo: f64,
    pub tta_zebra: f64,
    pub waiting_time_zebra: f64,
}

impl Coefficients {
    pub fn linear(&self, x: &GroundTruthFeatures) -> f64 {
        let z = if x.zebra { 1.0 } else { 0.0 };
        self.intercept
            + self.tta * x.tta
            + self.zebra * z
            + self.waiting_time * x.waiting_time_z
            + self.ped_aiss * x.ped_aiss_z
            + self.dsvo * x.dsvo_z
            + self.tta_zebra * x.tta * z
            + self.waiting_time_zebra * x.waiting_time_z * z
    }

    fn validate(&self, field: &str) -> Result<(), ConfigError> {
        let all = [
            self.intercept,
            self.tta,
            self.zebra,
            self.waiting_time,
            self.ped_aiss,
            self.dsvo,
            self.tta_zebra,
            self.waiting_time_zebra,
        ];
        if all.iter().all(|c| c.is_finite()) {
            Ok(())
        } else {
            Err(ConfigError::field(field, "coefficients must be finite"))
        }
    }
}

/// Ground-truth behavior model.
///
/// * decision: `logit = g · (decision · x) + ε`, `ε ~ N(0, decision_noise_sd)`,
///   where `g = zebra_logit_gain` at zebra crossings and 1 elsewhere;
///   the pedestrian crosses with probability `σ(logit)`.
/// * CIT: `cit_base · exp(cit · x + η)`, `η ~ N(0, cit_noise_sigma)`.
/// * CD: `cd_base(location) + cd · x + ζ`, `ζ ~ N(0, cd_noise_sd)`, kept
///   above `cd_min` by resampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BehaviorModelParams {
    pub decision: Coefficients,
    pub zebra_logit_gain: f64,
    pub decision_noise_sd: f64,
    pub cit_base: f64,
    pub cit: Coefficients,
    pub cit_noise_sigma: f64,
    pub cd_base_zebra: f64,
    pub cd_base_nonzebra: f64,
    pub cd: Coefficients,
    pub cd_noise_sd: f64,
    pub cd_min: f64,
}

impl Default for BehaviorModelParams {
    fn default() -> Self {
        BehaviorModelParams {
            // non-zebra: gap acceptance on TTA, threshold 4.5 s at average covariates;
            // zebra: mostly crossing, unless a long wait signals a non-yielding driver
            decision: Coefficients {
                intercept: -18.0,
                tta: 4.0,
                zebra: 19.3,
                waiting_time: -1.0,
                ped_aiss: 3.0,
                dsvo: -2.0,
                tta_zebra: -3.5,
                waiting_time_zebra: -4.0,
            },
            zebra_logit_gain: 3.0,
            decision_noise_sd: 2.0,
            cit_base: 1.0,
            cit: Coefficients {
                intercept: 0.0,
                tta: 0.08,
                zebra: 0.35,
                waiting_time: -0.1,
                ped_aiss: -0.3,
                dsvo: 0.2,
                tta_zebra: 0.0,
                waiting_time_zebra: 0.0,
            },
            cit_noise_sigma: 0.2,
            cd_base_zebra: 3.2,
            cd_base_nonzebra: 2.6,
            cd: Coefficients {
                intercept: 0.0,
                tta: 0.05,
                zebra: 0.0,
                waiting_time: -0.05,
                ped_aiss: -0.3,
                dsvo: 0.1,
                tta_zebra: 0.0,
                waiting_time_zebra: 0.0,
            },
            cd_noise_sd: 0.25,
            cd_min: 0.5,
        }
    }
}

impl BehaviorModelParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.decision.validate("behavior.decision")?;
        self.cit.validate("behavior.cit")?;
        self.cd.validate("behavior.cd")?;
        let non_negative = [
            ("behavior.decision_noise_sd", self.decision_noise_sd),
            ("behavior.cit_noise_sigma", self.cit_noise_sigma),
            ("behavior.cd_noise_sd", self.cd_noise_sd),
        ];
        for (field, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(ConfigError::field(field, format!("must be >= 0, got {v}")));
            }
        }
        let positive = [
            ("behavior.zebra_logit_gain", self.zebra_logit_gain),
            ("behavior.cit_base", self.cit_base),
            ("behavior.cd_base_zebra", self.cd_base_zebra),
            ("behavior.cd_base_nonzebra", self.cd_base_nonzebra),
            ("behavior.cd_min", self.cd_min),
        ];
        for (field, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ConfigError::field(field, format!("must be > 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Noise-free decision logit.
    pub fn decision_logit(&self, x: &GroundTruthFeatures) -> f64 {
        let gain = if x.zebra { self.zebra_logit_gain } else { 1.0 };
        gain * self.decision.linear(x)
    }
}

/// Crossing probability without the logit noise term.
pub fn ground_truth_crossing_probability(params: &BehaviorModelParams, x: &GroundTruthFeatures) -> f64 {
    sigmoid(params.decision_logit(x))
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// A physical crossing site of the study road.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Site {
    pub id: String,
    pub kind: Location,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneratorConfig {
    pub n_pairs: usize,
    pub tta_levels: Vec<f64>,
    pub locations: Vec<Site>,
    pub blocks: usize,
    pub waiting_time: TruncatedNormal,
    pub driver_svo: TruncatedNormal,
    pub pedestrian_svo: TruncatedNormal,
    pub driver_aiss: TruncatedNormal,
    pub pedestrian_aiss: TruncatedNormal,
    pub driver_age: TruncatedNormal,
    pub pedestrian_age: TruncatedNormal,
    pub driver_female_fraction: f64,
    pub pedestrian_female_fraction: f64,
    pub behavior: BehaviorModelParams,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        let site = |id: &str, kind| Site {
            id: id.to_string(),
            kind,
        };
        GeneratorConfig {
            n_pairs: 32,
            tta_levels: vec![3.0, 4.0, 5.0, 6.0, 7.0],
            locations: vec![
                site("zebra_1", Location::Zebra),
                site("zebra_2", Location::Zebra),
                site("non_zebra_1", Location::NonZebra),
                site("non_zebra_2", Location::NonZebra),
            ],
            blocks: 2,
            waiting_time: TruncatedNormal::new(52.71, 19.04, 13.8, 106.98),
            driver_svo: TruncatedNormal::new(53.17, 8.35, 45.00, 78.38),
            pedestrian_svo: TruncatedNormal::new(53.67, 7.82, 43.92, 75.26),
            driver_aiss: TruncatedNormal::new(53.78, 6.70, 43.00, 69.00),
            pedestrian_aiss: TruncatedNormal::new(50.47, 7.17, 27.00, 61.00),
            driver_age: TruncatedNormal::new(31.53, 7.0, 21.0, 50.0),
            pedestrian_age: TruncatedNormal::new(25.09, 4.0, 19.0, 34.0),
            driver_female_fraction: 0.5,
            pedestrian_female_fraction: 0.5,
            behavior: BehaviorModelParams::default(),
            seed: 0,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_pairs == 0 {
            return Err(ConfigError::field("n_pairs", "must be >= 1"));
        }
        if self.blocks == 0 {
            return Err(ConfigError::field("blocks", "must be >= 1"));
        }
        if self.tta_levels.is_empty() {
            return Err(ConfigError::field("tta_levels", "must not be empty"));
        }
        if let Some(bad) = self.tta_levels.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
            return Err(ConfigError::field(
                "tta_levels",
                format!("levels must be positive, got {bad}"),
            ));
        }
        if self.locations.is_empty() {
            return Err(ConfigError::field("locations", "must not be empty"));
        }
        self.waiting_time.validate("waiting_time")?;
        if self.waiting_time.high <= 0.0 {
            return Err(ConfigError::field("waiting_time", "upper bound must be positive"));
        }
        self.driver_svo.validate("driver_svo")?;
        self.pedestrian_svo.validate("pedestrian_svo")?;
        self.driver_aiss.validate("driver_aiss")?;
        self.pedestrian_aiss.validate("pedestrian_aiss")?;
        for (field, age) in [
            ("driver_age", &self.driver_age),
            ("pedestrian_age", &self.pedestrian_age),
        ] {
            age.validate(field)?;
            if age.low < MIN_AGE as f64 || age.high > MAX_AGE as f64 {
                return Err(ConfigError::field(
                    field,
                    format!("bounds must lie within [{MIN_AGE}, {MAX_AGE}]"),
                ));
            }
        }
        for (field, p) in [
            ("driver_female_fraction", self.driver_female_fraction),
            ("pedestrian_female_fraction", self.pedestrian_female_fraction),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(ConfigError::field(field, format!("must lie in [0, 1], got {p}")));
            }
        }
        self.behavior.validate()
    }

    /// Reads a TOML or JSON config (by file extension; TOML otherwise).
    /// Missing fields take their defaults.
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let parsed = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| e.to_string())
        } else {
            toml::from_str(&text).map_err(|e| e.to_string())
        };
        parsed.map_err(|message| ConfigError::Parse {
            path: path.to_path_buf(),
            message,
        })
    }

    pub fn trial_count(&self) -> usize {
        self.n_pairs * self.tta_levels.len() * self.locations.len() * self.blocks
    }

    /// Standardizes the raw covariates of a trial with the configured
    /// population parameters (not sample statistics).
    pub fn ground_truth_features(&self, trial: &Trial) -> GroundTruthFeatures {
        let dsvo_mean = self.pedestrian_svo.mean - self.driver_svo.mean;
        let dsvo_sd = self.pedestrian_svo.sd.hypot(self.driver_svo.sd);
        GroundTruthFeatures {
            tta: trial.tta,
            zebra: trial.location.is_zebra(),
            waiting_time_z: (trial.waiting_time - self.waiting_time.mean) / self.waiting_time.sd,
            ped_aiss_z: (trial.pedestrian.aiss - self.pedestrian_aiss.mean) / self.pedestrian_aiss.sd,
            dsvo_z: (trial.pedestrian.svo - trial.driver.svo - dsvo_mean) / dsvo_sd,
        }
    }
}

fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

fn sample_participant<R: Rng>(
    rng: &mut R,
    cfg: &GeneratorConfig,
    role: Role,
    pair_id: &str,
) -> Result<Participant, ConfigError> {
    let (age, svo, aiss, female, suffix) = match role {
        Role::Driver => (
            &cfg.driver_age,
            &cfg.driver_svo,
            &cfg.driver_aiss,
            cfg.driver_female_fraction,
            "d",
        ),
        Role::Pedestrian => (
            &cfg.pedestrian_age,
            &cfg.pedestrian_svo,
            &cfg.pedestrian_aiss,
            cfg.pedestrian_female_fraction,
            "p",
        ),
    };
    let age = age.sample(rng, "age")?.round() as u32;
    let gender = if rng.random::<f64>() < female {
        Gender::Female
    } else {
        Gender::Male
    };
    Ok(Participant {
        id: format!("{pair_id}-{suffix}"),
        role,
        age,
        gender,
        svo: round3(svo.sample(rng, "svo")?),
        aiss: round3(aiss.sample(rng, "aiss")?),
    })
}

/// Generates `n_pairs × |tta_levels| × |locations| × blocks` trials. The
/// output is a pure function of the config (including its seed).
pub fn generate_dataset(config: &GeneratorConfig) -> Result<Vec<Trial>, ConfigError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let width = config.n_pairs.to_string().len().max(2);
    let behavior = &config.behavior;
    let mut trials = Vec::with_capacity(config.trial_count());

    for pair in 0..config.n_pairs {
        let pair_id = format!("P{:0width$}", pair + 1);
        let driver = sample_participant(&mut rng, config, Role::Driver, &pair_id)?;
        let pedestrian = sample_participant(&mut rng, config, Role::Pedestrian, &pair_id)?;

        let mut conditions: Vec<(f64, Location)> = Vec::with_capacity(config.trial_count() / config.n_pairs);
        for _ in 0..config.blocks {
            for &tta in &config.tta_levels {
                for site in &config.locations {
                    conditions.push((tta, site.kind));
                }
            }
        }
        conditions.shuffle(&mut rng);

        for (tta, location) in conditions {
            let waiting_time = round3(config.waiting_time.sample(&mut rng, "waiting_time")?);
            let mut trial = Trial {
                pair_id: pair_id.clone(),
                driver: driver.clone(),
                pedestrian: pedestrian.clone(),
                tta,
                waiting_time,
                location,
                outcome: Outcome::wait(),
            };
            let x = config.ground_truth_features(&trial);
            let eps: f64 = StandardNormal.sample(&mut rng);
            let p = sigmoid(behavior.decision_logit(&x) + behavior.decision_noise_sd * eps);
            if rng.random::<f64>() < p {
                let eta: f64 = StandardNormal.sample(&mut rng);
                let cit = behavior.cit_base * (behavior.cit.linear(&x) + behavior.cit_noise_sigma * eta).exp();
                let base = match location {
                    Location::Zebra => behavior.cd_base_zebra,
                    Location::NonZebra => behavior.cd_base_nonzebra,
                };
                let cd_mean = base + behavior.cd.linear(&x);
                let cd = if behavior.cd_noise_sd > 0.0 {
                    sample_truncated(
                        &mut rng,
                        cd_mean,
                        behavior.cd_noise_sd,
                        behavior.cd_min,
                        f64::INFINITY,
                        "cd",
                    )?
                } else {
                    cd_mean.max(behavior.cd_min)
                };
                trial.outcome = Outcome::cross(round3(cit).max(0.001), round3(cd));
            }
            trials.push(trial);
        }
    }
    Ok(trials)
}
