//! The experiment grid: one cross-validated report per (task, model, feature
//! set) cell, the feature-subset ablation, and table/figure emission.
//!
//! Output layout under `out_dir`:
//! `reports/<task>_<model>_<features>.json`, `reports/ablation/…`,
//! `tables/<task>.csv`, `tables/<task>_ablation.csv`,
//! `tables/decision_importance.csv`, `figures/<name>.json` and
//! `reference/published.json`.

pub mod figures;
pub mod reference;

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{FeatureSet, Location, Trial};
use crate::error::{ConfigError, ExperimentError};
use crate::evaluation::{cross_validate, make_folds, targets, EvaluationReport, FoldPlan, Metrics, Target};
use crate::features::{encode, Standardizer};
use crate::io::read_trials_file;
use crate::models::{feature_importance, train, ModelFamily, ModelSpec};
use crate::synthgen::{generate_dataset, GeneratorConfig};

pub use figures::{box_stats, box_summary, histogram, histogram_density, BoxStats, FigureData, FigureKind, Histogram};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridCell {
    pub task: Target,
    pub model: ModelFamily,
    pub features: FeatureSet,
}

impl GridCell {
    pub fn new(task: Target, model: ModelFamily, features: FeatureSet) -> Self {
        GridCell { task, model, features }
    }

    pub fn stem(&self) -> String {
        format!("{}_{}_{}", self.task.name(), self.model.short(), self.features.name())
    }
}

/// Decision rows LR(baseline), LR/SVM/RF/MLP(ours); CIT rows LR(baseline),
/// RF/MLP(ours_delta); CD rows LR(baseline), RF/MLP(ours).
pub fn paper_grid() -> Vec<GridCell> {
    use FeatureSet::*;
    use ModelFamily::*;
    use Target::*;
    vec![
        GridCell::new(Decision, LogisticOrLinear, Baseline),
        GridCell::new(Decision, LogisticOrLinear, Ours),
        GridCell::new(Decision, SvmLinear, Ours),
        GridCell::new(Decision, RandomForest, Ours),
        GridCell::new(Decision, Mlp, Ours),
        GridCell::new(Cit, LogisticOrLinear, Baseline),
        GridCell::new(Cit, RandomForest, OursDelta),
        GridCell::new(Cit, Mlp, OursDelta),
        GridCell::new(Cd, LogisticOrLinear, Baseline),
        GridCell::new(Cd, RandomForest, Ours),
        GridCell::new(Cd, Mlp, Ours),
    ]
}

pub const ABLATION_FAMILIES: [ModelFamily; 3] = [
    ModelFamily::LogisticOrLinear,
    ModelFamily::RandomForest,
    ModelFamily::Mlp,
];

/// Feature set of the "all features" ablation row.
pub fn ablation_full_set(task: Target) -> FeatureSet {
    match task {
        Target::Cit => FeatureSet::OursDelta,
        Target::Decision | Target::Cd => FeatureSet::Ours,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSource {
    /// Synthetic data; `config` is an optional generator config file whose
    /// seed is replaced by `seed`.
    Generated {
        #[serde(default)]
        config: Option<PathBuf>,
        #[serde(default)]
        seed: u64,
    },
    Csv {
        path: PathBuf,
    },
}

impl Default for DatasetSource {
    fn default() -> Self {
        DatasetSource::Generated { config: None, seed: 0 }
    }
}

impl DatasetSource {
    pub fn load(&self) -> Result<Vec<Trial>, ExperimentError> {
        let trials = match self {
            DatasetSource::Generated { config, seed } => {
                let mut cfg = match config {
                    Some(path) => GeneratorConfig::from_file(path)?,
                    None => GeneratorConfig::default(),
                };
                cfg.seed = *seed;
                generate_dataset(&cfg)?
            }
            DatasetSource::Csv { path } => {
                let ingested = read_trials_file(path)?;
                for r in &ingested.rejected {
                    log::warn!("{}: line {} skipped: {}", path.display(), r.line, r.reason);
                }
                ingested.trials
            }
        };
        if trials.is_empty() {
            return Err(ExperimentError::Plan("dataset contains no valid trials".into()));
        }
        Ok(trials)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    /// Fold assignment.
    #[serde(default)]
    pub cv: u64,
    /// Model initialisation, bootstrap and shuffling.
    #[serde(default)]
    pub model: u64,
}

fn all_tasks() -> Vec<Target> {
    Target::ALL.to_vec()
}

/// Current plan file format.
pub const PLAN_VERSION: u32 = 1;

fn default_version() -> u32 {
    PLAN_VERSION
}

fn default_k() -> usize {
    5
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_bins() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    #[serde(default = "default_version")]
    pub version: u32,
    #[serde(default)]
    pub dataset: DatasetSource,
    #[serde(default = "all_tasks")]
    pub tasks: Vec<Target>,
    #[serde(default = "paper_grid")]
    pub grid: Vec<GridCell>,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub seeds: Seeds,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    #[serde(default = "default_bins")]
    pub histogram_bins: usize,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        ExperimentPlan {
            version: PLAN_VERSION,
            dataset: DatasetSource::default(),
            tasks: all_tasks(),
            grid: paper_grid(),
            k: default_k(),
            seeds: Seeds::default(),
            out_dir: default_out(),
            histogram_bins: default_bins(),
        }
    }
}

impl ExperimentPlan {
    /// JSON when the extension is `.json`, TOML otherwise.
    pub fn from_file(path: &Path) -> Result<Self, ExperimentError> {
        let text = fs::read_to_string(path).map_err(|source| ExperimentError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let parse_err = |message: String| ConfigError::Parse {
            path: path.to_path_buf(),
            message,
        };
        let plan: ExperimentPlan = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| parse_err(e.to_string()))?
        } else {
            toml::from_str(&text).map_err(|e| parse_err(e.to_string()))?
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.version != PLAN_VERSION {
            return Err(ExperimentError::Plan(format!(
                "unsupported plan version {}, expected {PLAN_VERSION}",
                self.version
            )));
        }
        if self.tasks.is_empty() {
            return Err(ExperimentError::Plan("no tasks selected".into()));
        }
        if self.k < 2 {
            return Err(ExperimentError::Plan(format!("k must be at least 2, got {}", self.k)));
        }
        if self.histogram_bins == 0 {
            return Err(ExperimentError::Plan("histogram_bins must be at least 1".into()));
        }
        if let Some(c) = self
            .grid
            .iter()
            .find(|c| c.model == ModelFamily::SvmLinear && c.task != Target::Decision)
        {
            return Err(ExperimentError::Plan(format!(
                "{}: svm is only used for the decision task",
                c.stem()
            )));
        }
        if self.cells().is_empty() {
            return Err(ExperimentError::Plan("grid has no cell for the selected tasks".into()));
        }
        Ok(())
    }

    /// Grid cells whose task is selected, in grid order.
    pub fn cells(&self) -> Vec<GridCell> {
        self.grid
            .iter()
            .copied()
            .filter(|c| self.tasks.contains(&c.task))
            .collect()
    }

    pub fn ablation_cells(&self) -> Vec<GridCell> {
        let mut cells = Vec::new();
        for &task in Target::ALL.iter().filter(|t| self.tasks.contains(t)) {
            let sets = std::iter::once(ablation_full_set(task)).chain(FeatureSet::SUBSETS);
            for features in sets {
                for model in ABLATION_FAMILIES {
                    cells.push(GridCell::new(task, model, features));
                }
            }
        }
        cells
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellFailure {
    pub cell: String,
    pub error: String,
}

#[derive(Debug, Clone, Default)]
pub struct RunSummary {
    pub reports: Vec<(GridCell, EvaluationReport)>,
    pub failures: Vec<CellFailure>,
    pub files: Vec<PathBuf>,
}

impl RunSummary {
    pub fn report(&self, cell: &GridCell) -> Option<&EvaluationReport> {
        self.reports.iter().find(|(c, _)| c == cell).map(|(_, r)| r)
    }

    pub fn succeeded(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Trials each task is evaluated on: everything for the decision, crossing
/// trials only for CIT and CD.
pub fn task_trials(trials: &[Trial], task: Target) -> Vec<Trial> {
    match task {
        Target::Decision => trials.to_vec(),
        Target::Cit | Target::Cd => trials.iter().filter(|t| t.outcome.crossed).cloned().collect(),
    }
}

struct TaskData {
    task: Target,
    trials: Vec<Trial>,
    folds: Result<FoldPlan, String>,
}

fn prepare(trials: &[Trial], plan: &ExperimentPlan) -> Vec<TaskData> {
    Target::ALL
        .into_iter()
        .filter(|t| plan.tasks.contains(t))
        .map(|task| {
            let trials = task_trials(trials, task);
            let folds = make_folds(trials.len(), plan.k, plan.seeds.cv).map_err(|e| e.to_string());
            TaskData { task, trials, folds }
        })
        .collect()
}

fn evaluate_cells(
    cells: &[GridCell],
    data: &[TaskData],
    plan: &ExperimentPlan,
) -> Vec<Result<EvaluationReport, String>> {
    cells
        .par_iter()
        .map(|cell| {
            let d = data.iter().find(|d| d.task == cell.task).expect("task prepared");
            let folds = d.folds.as_ref().map_err(Clone::clone)?;
            let spec = ModelSpec::new(cell.model, cell.task.task(), plan.seeds.model);
            log::info!("evaluating {}", cell.stem());
            cross_validate(&d.trials, cell.features, &spec, cell.task, folds).map_err(|e| e.to_string())
        })
        .collect()
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    }
}

struct Writer {
    files: Vec<PathBuf>,
}

impl Writer {
    fn json<T: Serialize>(&mut self, path: PathBuf, value: &T) -> Result<(), ExperimentError> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.text(path, &text)
    }

    fn csv(&mut self, path: PathBuf, header: &[String], rows: &[Vec<String>]) -> Result<(), ExperimentError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let to_err = |e: csv::Error| ExperimentError::Data(e.into());
        w.write_record(header).map_err(to_err)?;
        for r in rows {
            w.write_record(r).map_err(to_err)?;
        }
        let bytes = w.into_inner().map_err(|e| ExperimentError::Figure(e.to_string()))?;
        self.text(path, &String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    fn text(&mut self, path: PathBuf, text: &str) -> Result<(), ExperimentError> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(io_error(dir))?;
        }
        fs::write(&path, text).map_err(io_error(&path))?;
        self.files.push(path);
        Ok(())
    }
}

fn strata_columns(metric_names: [&str; 2]) -> Vec<String> {
    ["zebra", "non_zebra", "total"]
        .iter()
        .flat_map(|s| metric_names.iter().map(move |m| format!("{s}_{m}")))
        .collect()
}

fn metric_names(task: Target) -> [&'static str; 2] {
    match task {
        Target::Decision => ["acc", "f1"],
        Target::Cit | Target::Cd => ["mae", "rmse"],
    }
}

fn fmt_metrics(m: Option<&Metrics>) -> [String; 2] {
    match m {
        Some(m) => m.values().map(|(_, v)| v.to_string()),
        None => [String::new(), String::new()],
    }
}

/// Per-location and overall metrics of every grid cell of one task. The
/// total columns are the fold-mean headline numbers; location columns come
/// from pooled out-of-fold predictions.
fn task_table(task: Target, reports: &[(GridCell, EvaluationReport)]) -> (Vec<String>, Vec<Vec<String>>) {
    let mut header = vec!["model".to_string(), "features".to_string()];
    header.extend(strata_columns(metric_names(task)));
    let rows = reports
        .iter()
        .filter(|(c, _)| c.task == task)
        .map(|(c, r)| {
            let mut row = vec![c.model.short().to_string(), c.features.name().to_string()];
            row.extend(fmt_metrics(r.strata.zebra.as_ref().map(|s| &s.metrics)));
            row.extend(fmt_metrics(r.strata.non_zebra.as_ref().map(|s| &s.metrics)));
            row.extend(fmt_metrics(Some(&r.aggregate)));
            row
        })
        .collect();
    (header, rows)
}

fn by_tta_figure(task: Target, reports: &[(GridCell, EvaluationReport)]) -> Option<FigureData> {
    let mut fig = FigureData::new(FigureKind::ByTtaCurve, format!("{task} metrics by TTA level"));
    for (c, r) in reports.iter().filter(|(c, _)| c.task == task) {
        fig.series
            .entry("tta".into())
            .or_insert_with(|| r.by_tta.iter().map(|s| s.tta).collect());
        let names = metric_names(task);
        for (k, name) in names.iter().enumerate() {
            let values = r.by_tta.iter().map(|s| s.stratum.metrics.values()[k].1).collect();
            fig.series
                .insert(format!("{}_{}_{name}", c.model.short(), c.features.name()), values);
        }
    }
    (!fig.series.is_empty()).then_some(fig)
}

fn location_label(loc: Location) -> &'static str {
    match loc {
        Location::Zebra => "zebra",
        Location::NonZebra => "non_zebra",
    }
}

/// Box stats by location and histograms for the ground truth and each
/// model's out-of-fold predictions.
fn regression_figures(
    task: Target,
    reports: &[(GridCell, EvaluationReport)],
    bins: usize,
) -> Result<Option<(FigureData, FigureData)>, ExperimentError> {
    let task_reports: Vec<_> = reports.iter().filter(|(c, _)| c.task == task).collect();
    let Some((_, first)) = task_reports.first() else {
        return Ok(None);
    };
    let mut values = Vec::new();
    let mut groups = Vec::new();
    let mut hist = FigureData::new(FigureKind::Histogram, format!("{task} distribution"));
    let truth: Vec<f64> = first.predictions.iter().map(|p| p.truth).collect();
    hist.histograms.insert("GT".into(), histogram(&truth, bins)?);
    for p in &first.predictions {
        values.push(p.truth);
        groups.push(format!("GT/{}", location_label(p.location)));
    }
    for (c, r) in &task_reports {
        let label = format!("{}_{}", c.model.short(), c.features.name());
        let scores: Vec<f64> = r.predictions.iter().map(|p| p.score).collect();
        hist.histograms.insert(label.clone(), histogram(&scores, bins)?);
        for p in &r.predictions {
            values.push(p.score);
            groups.push(format!("{label}/{}", location_label(p.location)));
        }
    }
    let mut boxes = box_stats(&values, &groups)?;
    boxes.title = format!("{task} by location");
    Ok(Some((boxes, hist)))
}

#[derive(Debug, Clone, Serialize)]
struct ImportanceRow {
    model: String,
    features: String,
    rank: usize,
    feature: String,
    importance: f64,
}

/// Fits each decision cell that supports it on the full dataset and ranks
/// its features.
fn decision_importance(
    trials: &[Trial],
    cells: &[GridCell],
    plan: &ExperimentPlan,
) -> Vec<Result<Vec<ImportanceRow>, String>> {
    cells
        .par_iter()
        .map(|cell| {
            let x = encode(trials, cell.features).map_err(|e| e.to_string())?;
            let all: Vec<usize> = (0..x.n_rows()).collect();
            let x = Standardizer::fit(&x, &all)
                .and_then(|s| s.apply(&x))
                .map_err(|e| e.to_string())?;
            let y = targets(trials, Target::Decision).map_err(|e| e.to_string())?;
            let spec = ModelSpec::new(cell.model, cell.task.task(), plan.seeds.model);
            let model = train(&spec, &x, &y).map_err(|e| e.to_string())?;
            let ranked = feature_importance(&model).map_err(|e| e.to_string())?;
            Ok(ranked
                .into_iter()
                .enumerate()
                .map(|(i, (f, v))| ImportanceRow {
                    model: cell.model.short().into(),
                    features: cell.features.name().into(),
                    rank: i + 1,
                    feature: f.name().into(),
                    importance: v,
                })
                .collect())
        })
        .collect()
}

/// Runs every selected grid cell and writes reports, tables and figure
/// data. A failing cell is recorded in the summary; the others still run.
pub fn run_plan(plan: &ExperimentPlan, trials: &[Trial]) -> Result<RunSummary, ExperimentError> {
    plan.validate()?;
    let cells = plan.cells();
    let data = prepare(trials, plan);
    let results = evaluate_cells(&cells, &data, plan);

    let mut out = Writer { files: Vec::new() };
    let mut summary = RunSummary::default();
    let reports_dir = plan.out_dir.join("reports");
    for (cell, result) in cells.iter().zip(results) {
        match result {
            Ok(report) => {
                out.json(reports_dir.join(format!("{}.json", cell.stem())), &report)?;
                summary.reports.push((*cell, report));
            }
            Err(error) => {
                log::error!("{} failed: {error}", cell.stem());
                summary.failures.push(CellFailure {
                    cell: cell.stem(),
                    error,
                });
            }
        }
    }

    let tables = plan.out_dir.join("tables");
    let figures = plan.out_dir.join("figures");
    for task in Target::ALL.into_iter().filter(|t| plan.tasks.contains(t)) {
        let (header, rows) = task_table(task, &summary.reports);
        if !rows.is_empty() {
            out.csv(tables.join(format!("{task}.csv")), &header, &rows)?;
        }
        if let Some(fig) = by_tta_figure(task, &summary.reports) {
            out.json(figures.join(format!("{task}_by_tta.json")), &fig)?;
        }
        if task != Target::Decision {
            if let Some((boxes, hist)) = regression_figures(task, &summary.reports, plan.histogram_bins)? {
                out.json(figures.join(format!("{task}_box_stats.json")), &boxes)?;
                out.json(figures.join(format!("{task}_histogram.json")), &hist)?;
            }
        }
    }

    let ranked_cells: Vec<GridCell> = cells
        .iter()
        .copied()
        .filter(|c| c.task == Target::Decision && c.model != ModelFamily::Mlp)
        .collect();
    if !ranked_cells.is_empty() {
        let mut rows = Vec::new();
        for (cell, result) in ranked_cells
            .iter()
            .zip(decision_importance(trials, &ranked_cells, plan))
        {
            match result {
                Ok(r) => rows.extend(r),
                Err(error) => summary.failures.push(CellFailure {
                    cell: format!("importance:{}", cell.stem()),
                    error,
                }),
            }
        }
        let header: Vec<String> = ["model", "features", "rank", "feature", "importance"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let rows: Vec<Vec<String>> = rows
            .into_iter()
            .map(|r| {
                vec![
                    r.model,
                    r.features,
                    r.rank.to_string(),
                    r.feature,
                    r.importance.to_string(),
                ]
            })
            .collect();
        out.csv(tables.join("decision_importance.csv"), &header, &rows)?;
    }

    out.json(
        plan.out_dir.join("reference").join("published.json"),
        &reference::published(),
    )?;
    if !summary.failures.is_empty() {
        out.json(plan.out_dir.join("failures.json"), &summary.failures)?;
    }
    summary.files = out.files;
    Ok(summary)
}

/// Feature-subset ablation: all features plus subsets 1–4 for LR, RF and
/// MLP on every selected task. Writes one report per cell and a 5-row table
/// per task.
pub fn run_ablation(plan: &ExperimentPlan, trials: &[Trial]) -> Result<RunSummary, ExperimentError> {
    plan.validate()?;
    let cells = plan.ablation_cells();
    let data = prepare(trials, plan);
    let results = evaluate_cells(&cells, &data, plan);

    let mut out = Writer { files: Vec::new() };
    let mut summary = RunSummary::default();
    let reports_dir = plan.out_dir.join("reports").join("ablation");
    for (cell, result) in cells.iter().zip(results) {
        match result {
            Ok(report) => {
                out.json(reports_dir.join(format!("{}.json", cell.stem())), &report)?;
                summary.reports.push((*cell, report));
            }
            Err(error) => {
                log::error!("{} failed: {error}", cell.stem());
                summary.failures.push(CellFailure {
                    cell: cell.stem(),
                    error,
                });
            }
        }
    }

    for task in Target::ALL.into_iter().filter(|t| plan.tasks.contains(t)) {
        let names = metric_names(task);
        let mut header = vec!["features".to_string()];
        for m in ABLATION_FAMILIES {
            header.extend(names.iter().map(|n| format!("{}_{n}", m.short())));
        }
        let sets = std::iter::once(ablation_full_set(task)).chain(FeatureSet::SUBSETS);
        let rows: Vec<Vec<String>> = sets
            .enumerate()
            .map(|(i, features)| {
                let mut row = vec![if i == 0 {
                    "all".to_string()
                } else {
                    features.name().to_string()
                }];
                for model in ABLATION_FAMILIES {
                    let r = summary.report(&GridCell::new(task, model, features));
                    row.extend(fmt_metrics(r.map(|r| &r.aggregate)));
                }
                row
            })
            .collect();
        out.csv(
            plan.out_dir.join("tables").join(format!("{task}_ablation.csv")),
            &header,
            &rows,
        )?;
    }
    if !summary.failures.is_empty() {
        out.json(plan.out_dir.join("ablation_failures.json"), &summary.failures)?;
    }
    summary.files = out.files;
    Ok(summary)
}
