//! Design-matrix construction: feature extraction, full one-hot encoding of
//! categorical features and z-score standardization fitted on training rows.

use std::collections::BTreeSet;
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::domain::{Feature, FeatureSet, FeatureValue, Trial};
use crate::error::EncodeError;

/// Lower bound on stored standard deviations.
pub const SD_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMeta {
    pub feature: Feature,
    /// Category label for one-hot columns.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
    /// Present once the column has been standardized.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaling: Option<Scaling>,
}

impl ColumnMeta {
    pub fn is_one_hot(&self) -> bool {
        self.category.is_some()
    }

    fn same_column(&self, other: &ColumnMeta) -> bool {
        self.feature == other.feature && self.category == other.category
    }
}

impl fmt::Display for ColumnMeta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.category {
            Some(c) => write!(f, "{}={}", self.feature, c)?,
            None => write!(f, "{}", self.feature)?,
        }
        if let Some(s) = self.scaling {
            write!(f, "(z;mean={};sd={})", s.mean, s.sd)?;
        }
        Ok(())
    }
}

/// Dense row-major numeric matrix with per-column provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    n_rows: usize,
    data: Vec<f64>,
    columns: Vec<ColumnMeta>,
    /// Position of each row's trial in the encoded input.
    row_index: Vec<usize>,
}

impl DesignMatrix {
    /// Builds a matrix from raw parts. `data` is row-major.
    pub fn from_parts(data: Vec<f64>, columns: Vec<ColumnMeta>, row_index: Vec<usize>) -> Result<Self, EncodeError> {
        let d = columns.len();
        let n = row_index.len();
        if data.len() != n * d {
            return Err(EncodeError::Shape(format!(
                "{} values for {n} rows x {d} columns",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(EncodeError::NonFinite {
                row: pos / d.max(1),
                column: columns[pos % d.max(1)].to_string(),
            });
        }
        Ok(DesignMatrix {
            n_rows: n,
            data,
            columns,
            row_index,
        })
    }

    /// Convenience constructor for plain numeric columns (tests, tooling).
    pub fn from_rows(rows: &[Vec<f64>], features: &[Feature]) -> Result<Self, EncodeError> {
        let columns = features
            .iter()
            .map(|&feature| ColumnMeta {
                feature,
                category: None,
                scaling: None,
            })
            .collect::<Vec<_>>();
        if let Some(bad) = rows.iter().find(|r| r.len() != columns.len()) {
            return Err(EncodeError::Shape(format!(
                "row of width {} for {} columns",
                bad.len(),
                columns.len()
            )));
        }
        let data = rows.iter().flatten().copied().collect();
        Self::from_parts(data, columns, (0..rows.len()).collect())
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[ColumnMeta] {
        &self.columns
    }

    pub fn row_index(&self) -> &[usize] {
        &self.row_index
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.n_cols();
        &self.data[i * d..(i + 1) * d]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n_cols() + j]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact(0) panics
        let d = self.n_cols().max(1);
        self.data.chunks_exact(d).take(self.n_rows)
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_rows).map(move |i| self.get(i, j))
    }

    /// Copies the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> DesignMatrix {
        let mut data = Vec::with_capacity(rows.len() * self.n_cols());
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        DesignMatrix {
            n_rows: rows.len(),
            data,
            columns: self.columns.clone(),
            row_index: rows.iter().map(|&r| self.row_index[r]).collect(),
        }
    }

    /// Recovers the category of a one-hot encoded feature for row `i`.
    pub fn decode_category(&self, i: usize, feature: Feature) -> Option<&str> {
        self.columns
            .iter()
            .enumerate()
            .find(|(j, c)| c.feature == feature && c.category.is_some() && self.get(i, *j) == 1.0)
            .and_then(|(_, c)| c.category.as_deref())
    }

    /// Writes the matrix as CSV; the header row carries the column metadata.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), csv::Error> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header = vec!["row".to_string()];
        header.extend(self.columns.iter().map(|c| c.to_string()));
        wtr.write_record(&header)?;
        for (i, row) in self.rows().enumerate() {
            let mut rec = vec![self.row_index[i].to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Learned column layout for a feature set. Enum-valued categoricals use
/// their full domain vocabulary; open vocabularies (participant pair) are
/// learned from the fitting trials and sorted lexicographically.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    features: Vec<Feature>,
    vocab: Vec<Option<Vec<String>>>,
}

impl Encoder {
    pub fn fit(trials: &[Trial], set: FeatureSet) -> Self {
        let features = set.features().to_vec();
        let vocab = features
            .iter()
            .map(|&f| {
                if !f.is_categorical() {
                    return None;
                }
                Some(f.fixed_categories().unwrap_or_else(|| {
                    let seen: BTreeSet<String> = trials
                        .iter()
                        .filter_map(|t| match f.value(t) {
                            FeatureValue::Category(c) => Some(c),
                            FeatureValue::Numeric(_) => None,
                        })
                        .collect();
                    seen.into_iter().collect()
                }))
            })
            .collect();
        Encoder { features, vocab }
    }

    pub fn columns(&self) -> Vec<ColumnMeta> {
        let mut out = Vec::new();
        for (f, vocab) in self.features.iter().zip(&self.vocab) {
            match vocab {
                None => out.push(ColumnMeta {
                    feature: *f,
                    category: None,
                    scaling: None,
                }),
                Some(cats) => out.extend(cats.iter().map(|c| ColumnMeta {
                    feature: *f,
                    category: Some(c.clone()),
                    scaling: None,
                })),
            }
        }
        out
    }

    pub fn transform(&self, trials: &[Trial]) -> Result<DesignMatrix, EncodeError> {
        let columns = self.columns();
        let mut data = Vec::with_capacity(trials.len() * columns.len());
        for trial in trials {
            for (f, vocab) in self.features.iter().zip(&self.vocab) {
                match (f.value(trial), vocab) {
                    (FeatureValue::Numeric(x), None) => data.push(x),
                    (FeatureValue::Category(c), Some(cats)) => {
                        let hit = cats
                            .iter()
                            .position(|k| *k == c)
                            .ok_or_else(|| EncodeError::UnknownCategory {
                                feature: f.name().to_string(),
                                category: c.clone(),
                            })?;
                        data.extend((0..cats.len()).map(|k| if k == hit { 1.0 } else { 0.0 }));
                    }
                    _ => unreachable!("feature kind is fixed per feature"),
                }
            }
        }
        DesignMatrix::from_parts(data, columns, (0..trials.len()).collect())
    }
}

/// Encodes `trials` with a layout fitted on the same trials.
pub fn encode(trials: &[Trial], set: FeatureSet) -> Result<DesignMatrix, EncodeError> {
    Encoder::fit(trials, set).transform(trials)
}

/// Per-column z-score parameters; one-hot columns pass through unchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    columns: Vec<ColumnMeta>,
    stats: Vec<Option<Scaling>>,
}

impl Standardizer {
    /// Fits means and population standard deviations over `rows` only.
    pub fn fit(matrix: &DesignMatrix, rows: &[usize]) -> Result<Self, EncodeError> {
        if rows.is_empty() {
            return Err(EncodeError::Empty);
        }
        let n = rows.len() as f64;
        let stats = matrix
            .columns()
            .iter()
            .enumerate()
            .map(|(j, meta)| {
                if meta.is_one_hot() {
                    return None;
                }
                let mean = rows.iter().map(|&i| matrix.get(i, j)).sum::<f64>() / n;
                let var = rows.iter().map(|&i| (matrix.get(i, j) - mean).powi(2)).sum::<f64>() / n;
                Some(Scaling {
                    mean,
                    sd: var.sqrt().max(SD_FLOOR),
                })
            })
            .collect();
        Ok(Standardizer {
            columns: matrix.columns().iter().map(unscaled).collect(),
            stats,
        })
    }

    /// Rebuilds the standardizer recorded in a standardized column layout.
    pub fn from_columns(columns: &[ColumnMeta]) -> Self {
        Standardizer {
            columns: columns.iter().map(unscaled).collect(),
            stats: columns
                .iter()
                .map(|c| if c.is_one_hot() { None } else { c.scaling })
                .collect(),
        }
    }

    pub fn scaling(&self) -> &[Option<Scaling>] {
        &self.stats
    }

    /// Applies `(x - mean) / sd` to every scaled column. Expects a matrix
    /// that has not been standardized yet; applying twice is rejected.
    pub fn apply(&self, matrix: &DesignMatrix) -> Result<DesignMatrix, EncodeError> {
        let cols = matrix.columns();
        if cols.len() != self.columns.len() || cols.iter().zip(&self.columns).any(|(a, b)| !a.same_column(b)) {
            return Err(EncodeError::Shape(format!(
                "standardizer fitted on {} columns, matrix has {}",
                self.columns.len(),
                cols.len()
            )));
        }
        if let Some(c) = cols.iter().find(|c| c.scaling.is_some()) {
            return Err(EncodeError::Shape(format!("column {c} is already standardized")));
        }
        let d = cols.len();
        let mut data = matrix.data.clone();
        for (k, v) in data.iter_mut().enumerate() {
            if let Some(s) = self.stats[k % d] {
                *v = (*v - s.mean) / s.sd;
            }
        }
        let columns = cols
            .iter()
            .zip(&self.stats)
            .map(|(c, s)| ColumnMeta {
                scaling: *s,
                ..c.clone()
            })
            .collect();
        DesignMatrix::from_parts(data, columns, matrix.row_index.clone())
    }
}

fn unscaled(c: &ColumnMeta) -> ColumnMeta {
    ColumnMeta {
        scaling: None,
        ..c.clone()
    }
}

pub fn fit_standardizer(matrix: &DesignMatrix, rows: &[usize]) -> Result<Standardizer, EncodeError> {
    Standardizer::fit(matrix, rows)
}

pub fn apply_standardizer(std: &Standardizer, matrix: &DesignMatrix) -> Result<DesignMatrix, EncodeError> {
    std.apply(matrix)
}
