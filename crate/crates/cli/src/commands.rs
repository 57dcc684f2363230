use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use pedcross::evaluation::{cross_validate, make_folds, targets};
use pedcross::experiments::{run_ablation, run_plan, task_trials, DatasetSource, ExperimentPlan, GridCell, RunSummary};
use pedcross::features::{encode, Standardizer};
use pedcross::io::{read_trials_file, write_trials_file};
use pedcross::models::{save_model, train, ModelSpec};
use pedcross::synthgen::{generate_dataset, GeneratorConfig};
use pedcross::{ConfigError, DataError, EvalError, ExperimentError, ModelError, Trial};
use serde_json::{json, Value};

use crate::{CellArgs, Cli, Command, DataArgs, EvaluateArgs, IngestArgs, PlanArgs, ReportArgs, TrainArgs};

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config, plan or I/O: exit 2.
    Usage(String),
    /// The work itself failed: exit 1.
    Failed(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failed(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Failed(m) => f.write_str(m),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Failed(e.to_string())
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        CliError::Failed(e.to_string())
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Eval(_) | ExperimentError::Figure(_) => CliError::Failed(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

type Result<T> = std::result::Result<T, CliError>;

pub fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Generate => generate(cli),
        Command::Ingest(args) => ingest(cli, args),
        Command::Train(args) => train_cmd(cli, args),
        Command::Evaluate(args) => evaluate(cli, args),
        Command::Run(args) => run(cli, args, false),
        Command::Ablate(args) => run(cli, args, true),
        Command::Report(args) => report(cli, args),
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Usage(format!("{}: {e}", path.display()))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn require_out(cli: &Cli, what: &str) -> Result<PathBuf> {
    cli.out
        .clone()
        .ok_or_else(|| CliError::Usage(format!("--out <{what}> is required")))
}

/// Writes the resolved configuration of a command. No timestamps, so equal
/// inputs give equal files.
fn write_provenance(path: &Path, command: &str, resolved: Value) -> Result<()> {
    let record = json!({
        "tool": "pedcross",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "resolved": resolved,
    });
    let mut text = serde_json::to_string_pretty(&record)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| io_err(path, e))
}

/// Provenance for a single output file sits next to it.
fn sibling_provenance(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".provenance.json");
    out.with_file_name(name)
}

fn generator_config(cli: &Cli) -> Result<GeneratorConfig> {
    let mut cfg = match &cli.config {
        Some(path) => GeneratorConfig::from_file(path)?,
        None => GeneratorConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn generate(cli: &Cli) -> Result<()> {
    let out = require_out(cli, "csv path")?;
    let cfg = generator_config(cli)?;
    let trials = generate_dataset(&cfg)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    write_trials_file(&out, &trials)?;
    write_provenance(
        &sibling_provenance(&out),
        "generate",
        json!({ "config": cfg, "out": out }),
    )?;
    println!("wrote {} trials to {}", trials.len(), out.display());
    Ok(())
}

fn ingest(cli: &Cli, args: &IngestArgs) -> Result<()> {
    let ingested = read_trials_file(&args.data)?;
    for r in &ingested.rejected {
        eprintln!("line {}: {}", r.line, r.reason);
    }
    println!(
        "{} accepted, {} rejected",
        ingested.trials.len(),
        ingested.rejected.len()
    );
    if args.strict && !ingested.rejected.is_empty() {
        return Err(CliError::Failed(format!(
            "{} rows rejected in strict mode",
            ingested.rejected.len()
        )));
    }
    if let Some(out) = &cli.out {
        write_trials_file(out, &ingested.trials)?;
        write_provenance(
            &sibling_provenance(out),
            "ingest",
            json!({
                "data": args.data,
                "strict": args.strict,
                "accepted": ingested.trials.len(),
                "rejected": ingested.rejected,
            }),
        )?;
    }
    Ok(())
}

/// Trials from --data, or generated from --config/--seed. Returns the trials
/// and a provenance description of their source.
fn load_trials(cli: &Cli, data: &DataArgs) -> Result<(Vec<Trial>, Value)> {
    match &data.data {
        Some(path) => {
            let ingested = read_trials_file(path)?;
            if !ingested.rejected.is_empty() {
                log::warn!("{}: {} rows rejected", path.display(), ingested.rejected.len());
            }
            Ok((ingested.trials, json!({ "source": "csv", "path": path })))
        }
        None => {
            let cfg = generator_config(cli)?;
            let trials = generate_dataset(&cfg)?;
            Ok((trials, json!({ "source": "generated", "config": cfg })))
        }
    }
}

fn cell_json(cell: &CellArgs) -> Value {
    json!({ "task": cell.task, "model": cell.model, "features": cell.features })
}

fn train_cmd(cli: &Cli, args: &TrainArgs) -> Result<()> {
    let out = require_out(cli, "directory")?;
    let (trials, source) = load_trials(cli, &args.data)?;
    let trials = task_trials(&trials, args.cell.task);
    let seed = cli.seed.unwrap_or(0);
    let spec = ModelSpec::new(args.cell.model, args.cell.task.task(), seed);

    let raw = encode(&trials, args.cell.features).map_err(|e| CliError::Failed(e.to_string()))?;
    let all: Vec<usize> = (0..raw.n_rows()).collect();
    let x = Standardizer::fit(&raw, &all)
        .and_then(|s| s.apply(&raw))
        .map_err(|e| CliError::Failed(e.to_string()))?;
    let y = targets(&trials, args.cell.task)?;
    let model = train(&spec, &x, &y)?;

    create_dir(&out)?;
    save_model(&model, &out.join("model.json"))?;
    if args.dump_matrix {
        let path = out.join("design_matrix.csv");
        let file = fs::File::create(&path).map_err(|e| io_err(&path, e))?;
        x.write_csv(file).map_err(|e| CliError::Usage(e.to_string()))?;
    }
    write_provenance(
        &out.join("provenance.json"),
        "train",
        json!({ "dataset": source, "cell": cell_json(&args.cell), "spec": spec, "rows": trials.len() }),
    )?;
    println!(
        "trained {} on {} rows: {} iterations, final loss {}",
        args.cell.model.short(),
        trials.len(),
        model.metadata.iterations,
        model
            .metadata
            .final_loss
            .map_or_else(|| "n/a".to_string(), |l| format!("{l:.6}"))
    );
    Ok(())
}

fn evaluate(cli: &Cli, args: &EvaluateArgs) -> Result<()> {
    let out = require_out(cli, "directory")?;
    let (trials, source) = load_trials(cli, &args.data)?;
    let trials = task_trials(&trials, args.cell.task);
    let seed = cli.seed.unwrap_or(0);
    let spec = ModelSpec::new(args.cell.model, args.cell.task.task(), seed);
    let plan = make_folds(trials.len(), args.k, seed)?;
    let report = cross_validate(&trials, args.cell.features, &spec, args.cell.task, &plan)?;

    let cell = GridCell::new(args.cell.task, args.cell.model, args.cell.features);
    let dir = out.join("reports");
    create_dir(&dir)?;
    let path = dir.join(format!("{}.json", cell.stem()));
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| io_err(&path, e))?;
    write_provenance(
        &out.join("provenance.json"),
        "evaluate",
        json!({ "dataset": source, "cell": cell_json(&args.cell), "k": args.k, "seed": seed }),
    )?;
    let metrics: Vec<String> = report
        .aggregate
        .values()
        .iter()
        .map(|(name, v)| format!("{name} {v:.4}"))
        .collect();
    println!("{}: {}", cell.stem(), metrics.join(", "));
    Ok(())
}

/// Plan file (or the default plan) with command-line overrides applied.
fn resolve_plan(cli: &Cli, args: &PlanArgs) -> Result<ExperimentPlan> {
    let mut plan = match &args.plan {
        Some(path) => ExperimentPlan::from_file(path)?,
        None => ExperimentPlan::default(),
    };
    if let Some(path) = &args.data {
        plan.dataset = DatasetSource::Csv { path: path.clone() };
    }
    if let DatasetSource::Generated { config, seed } = &mut plan.dataset {
        if cli.config.is_some() {
            config.clone_from(&cli.config);
        }
        if let Some(s) = cli.seed {
            *seed = s;
        }
    }
    if let Some(s) = cli.seed {
        plan.seeds.cv = s;
        plan.seeds.model = s;
    }
    if let Some(out) = &cli.out {
        plan.out_dir = out.clone();
    }
    plan.validate()?;
    Ok(plan)
}

fn run(cli: &Cli, args: &PlanArgs, ablation: bool) -> Result<()> {
    let plan = resolve_plan(cli, args)?;
    let cells = if ablation { plan.ablation_cells() } else { plan.cells() };
    if args.dry_run {
        for c in &cells {
            println!("{}", c.stem());
        }
        println!("{} cells, output {}", cells.len(), plan.out_dir.display());
        return Ok(());
    }
    let trials = plan.dataset.load()?;
    let summary: RunSummary = if ablation {
        run_ablation(&plan, &trials)?
    } else {
        run_plan(&plan, &trials)?
    };
    let name = if ablation { "ablate" } else { "run" };
    let mut resolved = serde_json::to_value(&plan)?;
    resolved["trials"] = json!(trials.len());
    write_provenance(&plan.out_dir.join(format!("provenance_{name}.json")), name, resolved)?;

    for (cell, report) in &summary.reports {
        let metrics: Vec<String> = report
            .aggregate
            .values()
            .iter()
            .map(|(n, v)| format!("{n} {v:.4}"))
            .collect();
        println!("{:<28} {}", cell.stem(), metrics.join("  "));
    }
    println!(
        "{} reports written to {}",
        summary.reports.len(),
        plan.out_dir.display()
    );
    if summary.succeeded() {
        Ok(())
    } else {
        for f in &summary.failures {
            eprintln!("{}: {}", f.cell, f.error);
        }
        Err(CliError::Failed(format!("{} cells failed", summary.failures.len())))
    }
}

fn report_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| io_err(dir, e))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    files.sort();
    Ok(files)
}

fn report(cli: &Cli, args: &ReportArgs) -> Result<()> {
    let dir = args
        .dir
        .clone()
        .or_else(|| cli.out.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let reports = dir.join("reports");
    let mut files = report_files(&reports)?;
    let ablation = reports.join("ablation");
    if ablation.is_dir() {
        files.extend(report_files(&ablation)?);
    }
    if files.is_empty() {
        return Err(CliError::Usage(format!("no reports under {}", reports.display())));
    }
    for path in files {
        let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
        let v: Value = serde_json::from_str(&text)?;
        let stem = path.file_stem().unwrap_or_default().to_string_lossy();
        let metrics = v["aggregate"]
            .as_object()
            .map(|m| {
                m.iter()
                    .filter_map(|(k, x)| x.as_f64().map(|x| format!("{k} {x:.4}")))
                    .collect::<Vec<_>>()
                    .join("  ")
            })
            .unwrap_or_default();
        let prefix = if path.parent() == Some(ablation.as_path()) {
            "ablation/"
        } else {
            ""
        };
        println!("{:<37} k={}  {}", format!("{prefix}{stem}"), v["k"], metrics);
    }
    Ok(())
}
