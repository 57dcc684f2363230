//! Vocabulary shared by every stage of the pipeline: participants, trials,
//! outcomes and the named feature sets.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::DomainError;

pub const MIN_AGE: u32 = 18;
pub const MAX_AGE: u32 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Driver,
    Pedestrian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Gender {
    #[serde(rename = "F")]
    Female,
    #[serde(rename = "M")]
    Male,
}

impl Gender {
    pub const ALL: [Gender; 2] = [Gender::Female, Gender::Male];

    pub fn code(self) -> &'static str {
        match self {
            Gender::Female => "F",
            Gender::Male => "M",
        }
    }
}

impl FromStr for Gender {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "F" => Ok(Gender::Female),
            "M" => Ok(Gender::Male),
            other => Err(DomainError::UnknownCategory {
                field: "gender",
                value: other.to_string(),
            }),
        }
    }
}

/// Crossing location type. Declaration order is the canonical category order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Location {
    Zebra,
    NonZebra,
}

impl Location {
    pub const ALL: [Location; 2] = [Location::Zebra, Location::NonZebra];

    pub fn code(self) -> &'static str {
        match self {
            Location::Zebra => "zebra",
            Location::NonZebra => "non_zebra",
        }
    }

    pub fn is_zebra(self) -> bool {
        self == Location::Zebra
    }
}

impl FromStr for Location {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "zebra" => Ok(Location::Zebra),
            "non_zebra" => Ok(Location::NonZebra),
            other => Err(DomainError::UnknownCategory {
                field: "location",
                value: other.to_string(),
            }),
        }
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Participant {
    pub id: String,
    pub role: Role,
    pub age: u32,
    pub gender: Gender,
    /// SVO slider angle in degrees.
    pub svo: f64,
    pub aiss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    /// `true` when the pedestrian crossed in front of the vehicle.
    pub crossed: bool,
    pub cit: Option<f64>,
    pub cd: Option<f64>,
}

impl Outcome {
    pub fn wait() -> Self {
        Outcome {
            crossed: false,
            cit: None,
            cd: None,
        }
    }

    pub fn cross(cit: f64, cd: f64) -> Self {
        Outcome {
            crossed: true,
            cit: Some(cit),
            cd: Some(cd),
        }
    }
}

/// One driver/pedestrian interaction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub pair_id: String,
    pub driver: Participant,
    pub pedestrian: Participant,
    /// Time to arrival of the vehicle at the crossing, seconds.
    pub tta: f64,
    /// Time the pedestrian waited before being prompted, seconds.
    pub waiting_time: f64,
    pub location: Location,
    pub outcome: Outcome,
}

/// A broken invariant found by [`validate_trial`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NonPositiveTta(f64),
    NonPositiveWaitingTime(f64),
    WrongRole { slot: Role, found: Role },
    AgeOutOfRange { role: Role, age: u32 },
    NonFiniteScore { role: Role, score: &'static str },
    CitForWaitingTrial,
    CdForWaitingTrial,
    MissingCit,
    MissingCd,
    InvalidCit(f64),
    InvalidCd(f64),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonPositiveTta(v) => write!(f, "tta must be positive (got {v})"),
            Violation::NonPositiveWaitingTime(v) => {
                write!(f, "waiting_time must be positive (got {v})")
            }
            Violation::WrongRole { slot, found } => {
                write!(f, "{slot:?} slot holds a participant with role {found:?}")
            }
            Violation::AgeOutOfRange { role, age } => write!(f, "{role:?} age {age} outside [{MIN_AGE}, {MAX_AGE}]"),
            Violation::NonFiniteScore { role, score } => {
                write!(f, "{role:?} {score} must be finite")
            }
            Violation::CitForWaitingTrial => f.write_str("cit present for waiting trial"),
            Violation::CdForWaitingTrial => f.write_str("cd present for waiting trial"),
            Violation::MissingCit => f.write_str("cit missing for crossing trial"),
            Violation::MissingCd => f.write_str("cd missing for crossing trial"),
            Violation::InvalidCit(v) => write!(f, "cit must be positive and finite (got {v})"),
            Violation::InvalidCd(v) => write!(f, "cd must be positive and finite (got {v})"),
        }
    }
}

/// Collects every broken invariant of the trial; an empty list means the
/// trial is well formed.
pub fn validate_trial(trial: &Trial) -> Vec<Violation> {
    let mut out = Vec::new();
    if !(trial.tta > 0.0 && trial.tta.is_finite()) {
        out.push(Violation::NonPositiveTta(trial.tta));
    }
    if !(trial.waiting_time > 0.0 && trial.waiting_time.is_finite()) {
        out.push(Violation::NonPositiveWaitingTime(trial.waiting_time));
    }
    for (slot, p) in [(Role::Driver, &trial.driver), (Role::Pedestrian, &trial.pedestrian)] {
        if p.role != slot {
            out.push(Violation::WrongRole { slot, found: p.role });
        }
        if !(MIN_AGE..=MAX_AGE).contains(&p.age) {
            out.push(Violation::AgeOutOfRange { role: slot, age: p.age });
        }
        if !p.svo.is_finite() {
            out.push(Violation::NonFiniteScore {
                role: slot,
                score: "svo",
            });
        }
        if !p.aiss.is_finite() {
            out.push(Violation::NonFiniteScore {
                role: slot,
                score: "aiss",
            });
        }
    }
    let o = &trial.outcome;
    if o.crossed {
        match o.cit {
            None => out.push(Violation::MissingCit),
            Some(v) if !(v > 0.0 && v.is_finite()) => out.push(Violation::InvalidCit(v)),
            _ => {}
        }
        match o.cd {
            None => out.push(Violation::MissingCd),
            Some(v) if !(v > 0.0 && v.is_finite()) => out.push(Violation::InvalidCd(v)),
            _ => {}
        }
    } else {
        if o.cit.is_some() {
            out.push(Violation::CitForWaitingTrial);
        }
        if o.cd.is_some() {
            out.push(Violation::CdForWaitingTrial);
        }
    }
    out
}

/// Pedestrian-minus-driver differences of the personality scores,
/// returned as `(dSVO, dAISS)`.
pub fn derive_delta_features(trial: &Trial) -> (f64, f64) {
    (
        trial.pedestrian.svo - trial.driver.svo,
        trial.pedestrian.aiss - trial.driver.aiss,
    )
}

/// Input feature identifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Feature {
    #[serde(rename = "T_a")]
    Tta,
    #[serde(rename = "T_w")]
    WaitingTime,
    #[serde(rename = "L")]
    Location,
    #[serde(rename = "A_d")]
    DriverAge,
    #[serde(rename = "A_p")]
    PedestrianAge,
    #[serde(rename = "G_d")]
    DriverGender,
    #[serde(rename = "G_p")]
    PedestrianGender,
    #[serde(rename = "SVO_d")]
    DriverSvo,
    #[serde(rename = "SVO_p")]
    PedestrianSvo,
    #[serde(rename = "AISS_d")]
    DriverAiss,
    #[serde(rename = "AISS_p")]
    PedestrianAiss,
    #[serde(rename = "dSVO")]
    DeltaSvo,
    #[serde(rename = "dAISS")]
    DeltaAiss,
    #[serde(rename = "pair_id")]
    PairId,
}

/// The value a feature takes on a single trial.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureValue {
    Numeric(f64),
    Category(String),
}

impl Feature {
    pub const ALL: [Feature; 14] = [
        Feature::Tta,
        Feature::WaitingTime,
        Feature::Location,
        Feature::DriverAge,
        Feature::PedestrianAge,
        Feature::DriverGender,
        Feature::PedestrianGender,
        Feature::DriverSvo,
        Feature::PedestrianSvo,
        Feature::DriverAiss,
        Feature::PedestrianAiss,
        Feature::DeltaSvo,
        Feature::DeltaAiss,
        Feature::PairId,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Feature::Tta => "T_a",
            Feature::WaitingTime => "T_w",
            Feature::Location => "L",
            Feature::DriverAge => "A_d",
            Feature::PedestrianAge => "A_p",
            Feature::DriverGender => "G_d",
            Feature::PedestrianGender => "G_p",
            Feature::DriverSvo => "SVO_d",
            Feature::PedestrianSvo => "SVO_p",
            Feature::DriverAiss => "AISS_d",
            Feature::PedestrianAiss => "AISS_p",
            Feature::DeltaSvo => "dSVO",
            Feature::DeltaAiss => "dAISS",
            Feature::PairId => "pair_id",
        }
    }

    pub fn is_categorical(self) -> bool {
        matches!(
            self,
            Feature::Location | Feature::DriverGender | Feature::PedestrianGender | Feature::PairId
        )
    }

    /// Closed category vocabulary in canonical order, or `None` for
    /// open-vocabulary and numeric features.
    pub fn fixed_categories(self) -> Option<Vec<String>> {
        match self {
            Feature::Location => Some(Location::ALL.iter().map(|l| l.code().to_string()).collect()),
            Feature::DriverGender | Feature::PedestrianGender => {
                Some(Gender::ALL.iter().map(|g| g.code().to_string()).collect())
            }
            _ => None,
        }
    }

    pub fn value(self, trial: &Trial) -> FeatureValue {
        use FeatureValue::{Category, Numeric};
        match self {
            Feature::Tta => Numeric(trial.tta),
            Feature::WaitingTime => Numeric(trial.waiting_time),
            Feature::Location => Category(trial.location.code().to_string()),
            Feature::DriverAge => Numeric(trial.driver.age as f64),
            Feature::PedestrianAge => Numeric(trial.pedestrian.age as f64),
            Feature::DriverGender => Category(trial.driver.gender.code().to_string()),
            Feature::PedestrianGender => Category(trial.pedestrian.gender.code().to_string()),
            Feature::DriverSvo => Numeric(trial.driver.svo),
            Feature::PedestrianSvo => Numeric(trial.pedestrian.svo),
            Feature::DriverAiss => Numeric(trial.driver.aiss),
            Feature::PedestrianAiss => Numeric(trial.pedestrian.aiss),
            Feature::DeltaSvo => Numeric(derive_delta_features(trial).0),
            Feature::DeltaAiss => Numeric(derive_delta_features(trial).1),
            Feature::PairId => Category(trial.pair_id.clone()),
        }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Feature {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Feature::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| DomainError::UnknownFeature(s.to_string()))
    }
}

/// The named input selections used by the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSet {
    Baseline,
    Ours,
    OursDelta,
    Subset1,
    Subset2,
    Subset3,
    Subset4,
}

impl FeatureSet {
    pub const ALL: [FeatureSet; 7] = [
        FeatureSet::Baseline,
        FeatureSet::Ours,
        FeatureSet::OursDelta,
        FeatureSet::Subset1,
        FeatureSet::Subset2,
        FeatureSet::Subset3,
        FeatureSet::Subset4,
    ];

    pub const SUBSETS: [FeatureSet; 4] = [
        FeatureSet::Subset1,
        FeatureSet::Subset2,
        FeatureSet::Subset3,
        FeatureSet::Subset4,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureSet::Baseline => "baseline",
            FeatureSet::Ours => "ours",
            FeatureSet::OursDelta => "ours_delta",
            FeatureSet::Subset1 => "subset1",
            FeatureSet::Subset2 => "subset2",
            FeatureSet::Subset3 => "subset3",
            FeatureSet::Subset4 => "subset4",
        }
    }

    /// Ordered feature columns of the set.
    pub fn features(self) -> &'static [Feature] {
        use Feature::*;
        match self {
            FeatureSet::Baseline => &[
                Tta,
                WaitingTime,
                Location,
                PedestrianAge,
                PedestrianGender,
                DeltaSvo,
                DeltaAiss,
                PairId,
            ],
            FeatureSet::Ours => &[
                Tta,
                WaitingTime,
                Location,
                DriverAge,
                PedestrianAge,
                DriverGender,
                PedestrianGender,
                DriverSvo,
                PedestrianSvo,
                DriverAiss,
                PedestrianAiss,
            ],
            FeatureSet::OursDelta => &[
                Tta,
                WaitingTime,
                Location,
                DriverAge,
                PedestrianAge,
                DriverGender,
                PedestrianGender,
                DriverSvo,
                PedestrianSvo,
                DriverAiss,
                PedestrianAiss,
                DeltaSvo,
                DeltaAiss,
            ],
            FeatureSet::Subset1 => &[
                Tta,
                WaitingTime,
                Location,
                DriverAge,
                PedestrianAge,
                DriverGender,
                PedestrianGender,
            ],
            FeatureSet::Subset2 => &[Tta, WaitingTime, Location, DriverAge, DriverGender],
            FeatureSet::Subset3 => &[Tta, WaitingTime, Location, PedestrianAge, PedestrianGender],
            FeatureSet::Subset4 => &[Tta, WaitingTime, Location],
        }
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureSet {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FeatureSet::ALL
            .into_iter()
            .find(|set| set.name() == s)
            .ok_or_else(|| DomainError::UnknownFeatureSet(s.to_string()))
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use std::collections::BTreeSet;

    pub(crate) fn person(role: Role, age: u32, gender: Gender, svo: f64, aiss: f64) -> Participant {
        Participant {
            id: format!("{role:?}"),
            role,
            age,
            gender,
            svo,
            aiss,
        }
    }

    pub(crate) fn sample_trial() -> Trial {
        Trial {
            pair_id: "P01".into(),
            driver: person(Role::Driver, 31, Gender::Male, 53.17, 53.78),
            pedestrian: person(Role::Pedestrian, 25, Gender::Female, 53.67, 50.47),
            tta: 3.0,
            waiting_time: 50.0,
            location: Location::Zebra,
            outcome: Outcome::cross(0.8, 2.5),
        }
    }

    #[test]
    fn well_formed_trial_is_ok() {
        assert!(validate_trial(&sample_trial()).is_empty());
    }

    #[test]
    fn cit_on_waiting_trial_is_flagged() {
        let mut t = sample_trial();
        t.outcome = Outcome {
            crossed: false,
            cit: Some(1.2),
            cd: None,
        };
        let v = validate_trial(&t);
        assert_eq!(v, vec![Violation::CitForWaitingTrial]);
        assert_eq!(v[0].to_string(), "cit present for waiting trial");
    }

    #[test]
    fn negative_waiting_time_is_flagged() {
        let mut t = sample_trial();
        t.waiting_time = -1.0;
        let v = validate_trial(&t);
        assert_eq!(v, vec![Violation::NonPositiveWaitingTime(-1.0)]);
        assert!(v[0].to_string().starts_with("waiting_time must be positive"));
    }

    #[test]
    fn every_violation_is_reported() {
        let mut t = sample_trial();
        t.tta = 0.0;
        t.driver.role = Role::Pedestrian;
        t.pedestrian.age = 12;
        t.driver.svo = f64::NAN;
        t.outcome = Outcome {
            crossed: true,
            cit: None,
            cd: Some(-2.0),
        };
        assert_eq!(validate_trial(&t).len(), 6);
    }

    #[test]
    fn delta_features() {
        let mut t = sample_trial();
        t.pedestrian.svo = 53.67;
        t.driver.svo = 53.17;
        t.pedestrian.aiss = 27.0;
        t.driver.aiss = 69.0;
        let (dsvo, daiss) = derive_delta_features(&t);
        assert!((dsvo - 0.50).abs() < 1e-12);
        assert_eq!(daiss, -42.0);

        t.driver.svo = t.pedestrian.svo;
        assert_eq!(derive_delta_features(&t).0, 0.0);
    }

    #[test]
    fn delta_features_are_antisymmetric() {
        let t = sample_trial();
        let mut swapped = t.clone();
        std::mem::swap(&mut swapped.driver.svo, &mut swapped.pedestrian.svo);
        std::mem::swap(&mut swapped.driver.aiss, &mut swapped.pedestrian.aiss);
        let (a, b) = derive_delta_features(&t);
        let (c, d) = derive_delta_features(&swapped);
        assert_eq!(a, -c);
        assert_eq!(b, -d);
    }

    #[test]
    fn feature_sets_match_definitions() {
        let set = |fs: FeatureSet| -> BTreeSet<&str> { fs.features().iter().map(|f| f.name()).collect() };
        let names = |xs: &[&'static str]| -> BTreeSet<&str> { xs.iter().copied().collect() };
        assert_eq!(
            set(FeatureSet::Baseline),
            names(&["T_a", "T_w", "L", "A_p", "G_p", "dSVO", "dAISS", "pair_id"])
        );
        let ours = names(&[
            "T_a", "T_w", "L", "A_d", "A_p", "G_d", "G_p", "SVO_d", "SVO_p", "AISS_d", "AISS_p",
        ]);
        assert_eq!(set(FeatureSet::Ours), ours);
        let mut ours_delta = ours.clone();
        ours_delta.extend(["dSVO", "dAISS"]);
        assert_eq!(set(FeatureSet::OursDelta), ours_delta);
        assert_eq!(
            set(FeatureSet::Subset1),
            names(&["T_a", "T_w", "L", "A_d", "A_p", "G_d", "G_p"])
        );
        assert_eq!(set(FeatureSet::Subset2), names(&["T_a", "T_w", "L", "A_d", "G_d"]));
        assert_eq!(set(FeatureSet::Subset3), names(&["T_a", "T_w", "L", "A_p", "G_p"]));
        assert_eq!(set(FeatureSet::Subset4), names(&["T_a", "T_w", "L"]));
    }

    #[test]
    fn unknown_feature_set_is_rejected() {
        assert!("ours".parse::<FeatureSet>().is_ok());
        assert!(matches!(
            "everything".parse::<FeatureSet>(),
            Err(DomainError::UnknownFeatureSet(_))
        ));
    }

    #[test]
    fn every_feature_resolves_on_a_trial() {
        let t = sample_trial();
        for set in FeatureSet::ALL {
            for f in set.features() {
                let v = f.value(&t);
                match v {
                    FeatureValue::Numeric(x) => {
                        assert!(!f.is_categorical());
                        assert!(x.is_finite());
                    }
                    FeatureValue::Category(_) => assert!(f.is_categorical()),
                }
                assert_eq!(f.name().parse::<Feature>().unwrap(), *f);
            }
        }
    }
}
