//! Trial CSV reading and writing.
//!
//! Columns, in order: `pair_id, driver_age, driver_gender, driver_svo,
//! driver_aiss, ped_age, ped_gender, ped_svo, ped_aiss, tta, waiting_time,
//! location, decision, cit, cd`. `cit`/`cd` are empty for waiting trials.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::{validate_trial, Gender, Location, Outcome, Participant, Role, Trial};
use crate::error::DataError;

pub const HEADER: [&str; 15] = [
    "pair_id",
    "driver_age",
    "driver_gender",
    "driver_svo",
    "driver_aiss",
    "ped_age",
    "ped_gender",
    "ped_svo",
    "ped_aiss",
    "tta",
    "waiting_time",
    "location",
    "decision",
    "cit",
    "cd",
];

#[derive(Debug, Serialize, Deserialize)]
struct TrialRecord {
    pair_id: String,
    driver_age: f64,
    driver_gender: String,
    driver_svo: f64,
    driver_aiss: f64,
    ped_age: f64,
    ped_gender: String,
    ped_svo: f64,
    ped_aiss: f64,
    tta: f64,
    waiting_time: f64,
    location: String,
    decision: u8,
    cit: Option<f64>,
    cd: Option<f64>,
}

/// A row that failed parsing or validation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rejected {
    /// 1-based line number in the source file (the header is line 1).
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Default)]
pub struct Ingested {
    pub trials: Vec<Trial>,
    pub rejected: Vec<Rejected>,
}

fn age_from(raw: f64, role: Role, line: u64) -> Result<u32, String> {
    if !raw.is_finite() || raw < 0.0 {
        return Err(format!("{role:?} age {raw} is not a valid age"));
    }
    if raw.fract() != 0.0 {
        log::warn!("line {line}: {role:?} age {raw} truncated to {}", raw.trunc());
    }
    Ok(raw.trunc() as u32)
}

fn record_to_trial(rec: TrialRecord, line: u64) -> Result<Trial, String> {
    let parse_gender = |s: &str| s.parse::<Gender>().map_err(|e| e.to_string());
    let driver = Participant {
        id: format!("{}-d", rec.pair_id),
        role: Role::Driver,
        age: age_from(rec.driver_age, Role::Driver, line)?,
        gender: parse_gender(&rec.driver_gender)?,
        svo: rec.driver_svo,
        aiss: rec.driver_aiss,
    };
    let pedestrian = Participant {
        id: format!("{}-p", rec.pair_id),
        role: Role::Pedestrian,
        age: age_from(rec.ped_age, Role::Pedestrian, line)?,
        gender: parse_gender(&rec.ped_gender)?,
        svo: rec.ped_svo,
        aiss: rec.ped_aiss,
    };
    let location: Location = rec
        .location
        .parse()
        .map_err(|e: crate::error::DomainError| e.to_string())?;
    let crossed = match rec.decision {
        0 => false,
        1 => true,
        other => return Err(format!("decision must be 0 or 1, found {other}")),
    };
    Ok(Trial {
        pair_id: rec.pair_id,
        driver,
        pedestrian,
        tta: rec.tta,
        waiting_time: rec.waiting_time,
        location,
        outcome: Outcome {
            crossed,
            cit: rec.cit,
            cd: rec.cd,
        },
    })
}

fn trial_to_record(t: &Trial) -> TrialRecord {
    TrialRecord {
        pair_id: t.pair_id.clone(),
        driver_age: t.driver.age as f64,
        driver_gender: t.driver.gender.code().to_string(),
        driver_svo: t.driver.svo,
        driver_aiss: t.driver.aiss,
        ped_age: t.pedestrian.age as f64,
        ped_gender: t.pedestrian.gender.code().to_string(),
        ped_svo: t.pedestrian.svo,
        ped_aiss: t.pedestrian.aiss,
        tta: t.tta,
        waiting_time: t.waiting_time,
        location: t.location.code().to_string(),
        decision: u8::from(t.outcome.crossed),
        cit: t.outcome.cit,
        cd: t.outcome.cd,
    }
}

/// Parses and validates every row. Malformed or invalid rows are collected
/// in [`Ingested::rejected`] rather than aborting the read; only a broken
/// header or an I/O failure is an error.
pub fn read_trials<R: Read>(reader: R) -> Result<Ingested, DataError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.iter().ne(HEADER.iter().copied()) {
        return Err(DataError::Row {
            line: 1,
            message: format!(
                "header must be `{}`, found `{}`",
                HEADER.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let mut out = Ingested::default();
    for result in rdr.records() {
        let record = result?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let parsed = record
            .deserialize::<TrialRecord>(Some(&header))
            .map_err(|e| e.to_string())
            .and_then(|rec| record_to_trial(rec, line));
        match parsed {
            Ok(trial) => {
                let violations = validate_trial(&trial);
                if violations.is_empty() {
                    out.trials.push(trial);
                } else {
                    let reason = violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ");
                    out.rejected.push(Rejected { line, reason });
                }
            }
            Err(reason) => out.rejected.push(Rejected { line, reason }),
        }
    }
    Ok(out)
}

fn file_error(path: &Path, source: std::io::Error) -> DataError {
    DataError::File {
        path: path.to_path_buf(),
        source,
    }
}

pub fn read_trials_file(path: &Path) -> Result<Ingested, DataError> {
    read_trials(std::fs::File::open(path).map_err(|source| file_error(path, source))?)
}

pub fn write_trials<W: Write>(writer: W, trials: &[Trial]) -> Result<(), DataError> {
    let mut wtr = csv::Writer::from_writer(writer);
    if trials.is_empty() {
        wtr.write_record(HEADER)?;
    }
    for t in trials {
        wtr.serialize(trial_to_record(t))?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_trials_file(path: &Path, trials: &[Trial]) -> Result<(), DataError> {
    let file = std::fs::File::create(path).map_err(|source| file_error(path, source))?;
    write_trials(std::io::BufWriter::new(file), trials)
}
