use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::ExperimentError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FigureKind {
    ByTtaCurve,
    BoxStats,
    Histogram,
}

/// Tukey box summary of one group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub group: String,
    pub n: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub outliers: Vec<f64>,
}

/// Equal-width bins; `edges` has one more entry than `densities`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub densities: Vec<f64>,
}

impl Histogram {
    pub fn area(&self) -> f64 {
        self.densities
            .iter()
            .zip(self.edges.windows(2))
            .map(|(d, e)| d * (e[1] - e[0]))
            .sum()
    }
}

/// Plot-ready data for one figure. Only the part matching `kind` is filled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigureData {
    pub kind: FigureKind,
    pub title: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub series: BTreeMap<String, Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub boxes: Vec<BoxStats>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub histograms: BTreeMap<String, Histogram>,
}

impl FigureData {
    pub fn new(kind: FigureKind, title: impl Into<String>) -> Self {
        FigureData {
            kind,
            title: title.into(),
            series: BTreeMap::new(),
            boxes: Vec::new(),
            histograms: BTreeMap::new(),
        }
    }
}

fn finite_sorted(values: &[f64], what: &str) -> Result<Vec<f64>, ExperimentError> {
    if values.is_empty() {
        return Err(ExperimentError::Figure(format!("{what}: no values")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(ExperimentError::Figure(format!("{what}: non-finite value")));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Quantile of sorted data by linear interpolation between order statistics.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Tukey summary: whiskers reach the most extreme points within 1.5·IQR of
/// the quartiles, anything beyond is an outlier.
pub fn box_summary(group: &str, values: &[f64]) -> Result<BoxStats, ExperimentError> {
    let v = finite_sorted(values, group)?;
    let q1 = quantile(&v, 0.25);
    let q3 = quantile(&v, 0.75);
    let fence = 1.5 * (q3 - q1);
    let (low, high) = (q1 - fence, q3 + fence);
    let inside = || v.iter().copied().filter(|x| *x >= low && *x <= high);
    Ok(BoxStats {
        group: group.to_string(),
        n: v.len(),
        median: quantile(&v, 0.5),
        q1,
        q3,
        whisker_low: inside().fold(f64::INFINITY, f64::min),
        whisker_high: inside().fold(f64::NEG_INFINITY, f64::max),
        outliers: v.iter().copied().filter(|x| *x < low || *x > high).collect(),
    })
}

/// One box per distinct group label, in order of first appearance.
pub fn box_stats(values: &[f64], groups: &[String]) -> Result<FigureData, ExperimentError> {
    if values.len() != groups.len() {
        return Err(ExperimentError::Figure(format!(
            "{} values but {} group labels",
            values.len(),
            groups.len()
        )));
    }
    let mut order: Vec<&str> = Vec::new();
    let mut members: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for (v, g) in values.iter().zip(groups) {
        if !members.contains_key(g.as_str()) {
            order.push(g);
        }
        members.entry(g).or_default().push(*v);
    }
    let mut fig = FigureData::new(FigureKind::BoxStats, "box_stats");
    for g in order {
        fig.boxes.push(box_summary(g, &members[g])?);
    }
    Ok(fig)
}

/// Equal-width bins over `[min, max]`, densities scaled to unit total area.
/// If every value is identical the result is a single bin of width 1
/// centred on that value.
pub fn histogram(values: &[f64], n_bins: usize) -> Result<Histogram, ExperimentError> {
    if n_bins == 0 {
        return Err(ExperimentError::Figure("histogram needs at least one bin".into()));
    }
    let v = finite_sorted(values, "histogram")?;
    let (min, max) = (v[0], v[v.len() - 1]);
    let n = v.len() as f64;
    if min == max {
        return Ok(Histogram {
            edges: vec![min - 0.5, min + 0.5],
            densities: vec![1.0],
        });
    }
    let width = (max - min) / n_bins as f64;
    let mut counts = vec![0usize; n_bins];
    for x in &v {
        let b = (((x - min) / width) as usize).min(n_bins - 1);
        counts[b] += 1;
    }
    let edges: Vec<f64> = (0..=n_bins)
        .map(|i| if i == n_bins { max } else { min + i as f64 * width })
        .collect();
    let densities = counts
        .iter()
        .zip(edges.windows(2))
        .map(|(c, e)| *c as f64 / (n * (e[1] - e[0])))
        .collect();
    Ok(Histogram { edges, densities })
}

pub fn histogram_density(values: &[f64], n_bins: usize) -> Result<FigureData, ExperimentError> {
    let mut fig = FigureData::new(FigureKind::Histogram, "histogram");
    fig.histograms.insert("values".into(), histogram(values, n_bins)?);
    Ok(fig)
}
