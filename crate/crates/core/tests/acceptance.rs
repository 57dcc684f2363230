//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use pedcross::evaluation::{accuracy, cross_validate, f1, fit_fold, mae, make_folds, rmse, EvaluationReport, Target};
use pedcross::experiments::{ablation_full_set, run_ablation, run_plan, task_trials, ExperimentPlan};
use pedcross::features::{encode, Encoder, Standardizer};
use pedcross::models::{load_model, predict, save_model, train, Mlp, ModelFamily, ModelSpec, Task};
use pedcross::synthgen::{generate_dataset, GeneratorConfig};
use pedcross::{EncodeError, Feature, FeatureSet, Location, Trial};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: impl Into<String>) -> Outcome {
    if ok {
        Ok(detail.into())
    } else {
        Err(detail.into())
    }
}

fn within(limit: Duration, start: Instant) -> Result<Duration, String> {
    let took = start.elapsed();
    if took <= limit {
        Ok(took)
    } else {
        Err(format!("took {took:.1?}, limit {limit:?}"))
    }
}

fn default_trials(seed: u64) -> Vec<Trial> {
    generate_dataset(&GeneratorConfig {
        seed,
        ..GeneratorConfig::default()
    })
    .unwrap()
}

// Brute-force metric oracles, written independently of the library.

fn oracle_accuracy(t: &[bool], p: &[bool]) -> f64 {
    let mut hits = 0.0;
    for i in 0..t.len() {
        if t[i] == p[i] {
            hits += 1.0;
        }
    }
    hits / t.len() as f64
}

fn oracle_f1(t: &[bool], p: &[bool]) -> f64 {
    let (mut tp, mut fp, mut fn_) = (0.0, 0.0, 0.0);
    for i in 0..t.len() {
        match (t[i], p[i]) {
            (true, true) => tp += 1.0,
            (false, true) => fp += 1.0,
            (true, false) => fn_ += 1.0,
            (false, false) => {}
        }
    }
    if tp + fp + fn_ == 0.0 {
        return 1.0;
    }
    if tp == 0.0 {
        return 0.0;
    }
    let precision = tp / (tp + fp);
    let recall = tp / (tp + fn_);
    2.0 * precision * recall / (precision + recall)
}

fn oracle_mae(t: &[f64], p: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..t.len() {
        s += (t[i] - p[i]).abs();
    }
    s / t.len() as f64
}

fn oracle_rmse(t: &[f64], p: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..t.len() {
        s += (t[i] - p[i]) * (t[i] - p[i]);
    }
    (s / t.len() as f64).sqrt()
}

fn metric_oracles() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=200);
        let positive_rate = rng.random::<f64>();
        let t: Vec<bool> = (0..n).map(|_| rng.random::<f64>() < positive_rate).collect();
        let p: Vec<bool> = (0..n).map(|_| rng.random::<f64>() < positive_rate).collect();
        let tr: Vec<f64> = (0..n).map(|_| rng.random_range(-50.0..50.0)).collect();
        let pr: Vec<f64> = (0..n).map(|_| rng.random_range(-50.0..50.0)).collect();
        for (got, want) in [
            (accuracy(&t, &p).unwrap(), oracle_accuracy(&t, &p)),
            (f1(&t, &p).unwrap(), oracle_f1(&t, &p)),
            (mae(&tr, &pr).unwrap(), oracle_mae(&tr, &pr)),
            (rmse(&tr, &pr).unwrap(), oracle_rmse(&tr, &pr)),
        ] {
            worst = worst.max((got - want).abs());
        }
    }
    let took = within(Duration::from_secs(5), start)?;
    check(
        worst <= 1e-12,
        format!("1000 vectors, max |diff| {worst:.1e}, {took:.2?}"),
    )
}

fn worked_values() -> Outcome {
    // TP=2, FP=1, FN=1
    let f = f1(&[true, true, false, true], &[true, true, true, false]).unwrap();
    let r = rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap();
    let mut sizes = make_folds(1279, 5, 0).map_err(|e| e.to_string())?.sizes();
    sizes.sort_unstable();
    let ok = (f - 2.0 / 3.0).abs() < 1e-15 && (r - 12.5f64.sqrt()).abs() < 1e-15 && sizes == [255, 256, 256, 256, 256];
    check(ok, format!("F1 {f:.6}, RMSE {r:.6}, fold sizes {sizes:?}"))
}

/// Relative error with a floor on the denominator for near-zero entries.
fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

fn mlp_gradient_check() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let shapes: [&[usize]; 5] = [&[16, 4], &[3], &[5, 2], &[8, 8, 3], &[1]];
    let feats = [
        Feature::Tta,
        Feature::WaitingTime,
        Feature::DriverAge,
        Feature::PedestrianAge,
        Feature::DriverSvo,
        Feature::PedestrianSvo,
    ];
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for cfg in 0..20 {
        let hidden = shapes[cfg % shapes.len()];
        let task = if cfg % 2 == 0 { Task::Classify } else { Task::Regress };
        let d = rng.random_range(2..=feats.len());
        let n = rng.random_range(4..24);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let x = pedcross::features::DesignMatrix::from_rows(&rows, &feats[..d]).unwrap();
        let y: Vec<f64> = (0..n)
            .map(|_| match task {
                Task::Classify => f64::from(u8::from(rng.random::<bool>())),
                Task::Regress => rng.random_range(-3.0..3.0),
            })
            .collect();
        let mut net = Mlp::glorot(d, hidden, &mut rng);
        let mut theta = net.flatten();
        for v in theta.iter_mut() {
            *v += rng.random_range(-0.1..0.1);
        }
        net.set_flat(&theta);
        let analytic = net.loss_and_gradient(&x, &y, task).1.flatten();
        let mut probe = net.clone();
        for k in 0..theta.len() {
            let mut t = theta.clone();
            t[k] = theta[k] + h;
            probe.set_flat(&t);
            let up = probe.loss(&x, &y, task);
            t[k] = theta[k] - h;
            probe.set_flat(&t);
            let down = probe.loss(&x, &y, task);
            worst = worst.max(rel_err(analytic[k], (up - down) / (2.0 * h)));
        }
    }
    let took = within(Duration::from_secs(30), start)?;
    check(
        worst < 1e-4,
        format!("20 configs incl. 16-4, max rel err {worst:.2e}, {took:.2?}"),
    )
}

fn cv_hygiene() -> Outcome {
    let trials = default_trials(0);
    let n = trials.len();
    let plan = make_folds(n, 5, 0).map_err(|e| e.to_string())?;
    let mut seen = vec![0; n];
    for f in 0..plan.k {
        for i in plan.test_rows(f) {
            seen[i] += 1;
        }
    }
    if seen.iter().any(|&c| c != 1) {
        return Err("folds do not partition the trials".into());
    }
    let sizes = plan.sizes();
    if sizes.iter().max().unwrap() - sizes.iter().min().unwrap() > 1 {
        return Err(format!("unbalanced folds {sizes:?}"));
    }

    let x = encode(&trials, FeatureSet::Ours).map_err(|e| e.to_string())?;
    let y: Vec<f64> = trials.iter().map(|t| f64::from(u8::from(t.outcome.crossed))).collect();
    let mut checked = 0;
    for family in ModelFamily::ALL {
        let spec = ModelSpec::new(family, Task::Classify, 0);
        for fold in [0, 3] {
            let before = fit_fold(&x, &y, &spec, &plan, fold).map_err(|e| e.to_string())?;
            let mut mutated = y.clone();
            for &i in &before.test_rows {
                mutated[i] = 1.0 - mutated[i];
            }
            let after = fit_fold(&x, &mutated, &spec, &plan, fold).map_err(|e| e.to_string())?;
            let same = serde_json::to_string(&before.model.parameters).unwrap()
                == serde_json::to_string(&after.model.parameters).unwrap()
                && before.standardizer == after.standardizer;
            if !same {
                return Err(format!("{} fold {fold}: parameters changed", family.name()));
            }
            checked += 1;
        }
    }
    check(
        true,
        format!("partition ok, sizes {sizes:?}, {checked} fold fits unchanged"),
    )
}

fn encoder_checks() -> Outcome {
    let trials = default_trials(0);
    let x = encode(&trials, FeatureSet::Baseline).map_err(|e| e.to_string())?;
    let groups = [Feature::Location, Feature::PedestrianGender, Feature::PairId];
    for g in groups {
        let cols: Vec<usize> = (0..x.n_cols()).filter(|&j| x.columns()[j].feature == g).collect();
        if (0..x.n_rows()).any(|i| cols.iter().map(|&j| x.get(i, j)).sum::<f64>() != 1.0) {
            return Err(format!("{g:?} one-hot rows do not sum to 1"));
        }
    }

    let x = encode(&trials, FeatureSet::OursDelta).map_err(|e| e.to_string())?;
    let train: Vec<usize> = (0..x.n_rows()).filter(|i| i % 5 != 2).collect();
    let z = Standardizer::fit(&x, &train)
        .and_then(|s| s.apply(&x))
        .map_err(|e| e.to_string())?;
    let (mut worst_mean, mut worst_sd): (f64, f64) = (0.0, 0.0);
    for j in (0..z.n_cols()).filter(|&j| !z.columns()[j].is_one_hot()) {
        let v: Vec<f64> = train.iter().map(|&i| z.get(i, j)).collect();
        let m = v.iter().sum::<f64>() / v.len() as f64;
        let sd = (v.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / v.len() as f64).sqrt();
        worst_mean = worst_mean.max(m.abs());
        worst_sd = worst_sd.max((sd - 1.0).abs());
    }

    let known: Vec<Trial> = trials.iter().filter(|t| t.pair_id != "P01").cloned().collect();
    let unseen = Encoder::fit(&known, FeatureSet::Baseline).transform(&trials);
    let errs = matches!(unseen, Err(EncodeError::UnknownCategory { .. }));
    check(
        worst_mean <= 1e-9 && worst_sd <= 1e-9 && errs,
        format!("one-hot sums 1, |mean| {worst_mean:.1e}, |sd-1| {worst_sd:.1e}, unseen category errors: {errs}"),
    )
}

fn planted_rule() -> Outcome {
    let mut trials = default_trials(3);
    for t in &mut trials {
        t.outcome = if t.tta >= 5.0 {
            pedcross::domain::Outcome::cross(1.0, 3.0)
        } else {
            pedcross::domain::Outcome::wait()
        };
    }
    let plan = make_folds(trials.len(), 5, 0).map_err(|e| e.to_string())?;
    let mut accs = Vec::new();
    for family in ModelFamily::ALL {
        let spec = ModelSpec::new(family, Task::Classify, 0);
        let r = cross_validate(&trials, FeatureSet::Ours, &spec, Target::Decision, &plan).map_err(|e| e.to_string())?;
        accs.push((family.short(), r.aggregate.primary()));
    }
    let ok = accs.iter().all(|(_, a)| *a >= 0.99);
    let detail: Vec<String> = accs.iter().map(|(f, a)| format!("{f} {a:.4}")).collect();
    check(ok, detail.join(", "))
}

const QUALITATIVE_SEEDS: u64 = 10;
const QUALITATIVE_MAJORITY: usize = 7;

fn better(task: Target, a: f64, b: f64) -> bool {
    match task {
        Target::Decision => a >= b,
        Target::Cit | Target::Cd => a <= b,
    }
}

fn tta_acc(r: &EvaluationReport, tta: f64) -> f64 {
    r.by_tta
        .iter()
        .find(|s| s.tta == tta)
        .map(|s| s.stratum.metrics.primary())
        .expect("tta level present")
}

fn mean_cd(trials: &[Trial], loc: Location) -> f64 {
    let v: Vec<f64> = trials
        .iter()
        .filter(|t| t.location == loc)
        .filter_map(|t| t.outcome.cd)
        .collect();
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sub-check name → whether it held, for one seed.
fn qualitative_seed(seed: u64) -> Result<BTreeMap<String, bool>, String> {
    let trials = default_trials(seed);
    let mut out = BTreeMap::new();
    let cv = |task: Target, family: ModelFamily, set: FeatureSet| -> Result<EvaluationReport, String> {
        let data = task_trials(&trials, task);
        let plan = make_folds(data.len(), 5, seed).map_err(|e| e.to_string())?;
        cross_validate(&data, set, &ModelSpec::new(family, task.task(), seed), task, &plan).map_err(|e| e.to_string())
    };

    use ModelFamily::*;
    let decision = [
        (
            "lr_baseline",
            cv(Target::Decision, LogisticOrLinear, FeatureSet::Baseline)?,
        ),
        ("lr", cv(Target::Decision, LogisticOrLinear, FeatureSet::Ours)?),
        ("svm", cv(Target::Decision, SvmLinear, FeatureSet::Ours)?),
        ("rf", cv(Target::Decision, RandomForest, FeatureSet::Ours)?),
        ("mlp", cv(Target::Decision, Mlp, FeatureSet::Ours)?),
    ];
    let total = |name: &str| decision.iter().find(|(n, _)| *n == name).unwrap().1.aggregate.primary();
    let lr_best = total("lr").max(total("lr_baseline"));
    out.insert("a: rf >= lr".into(), total("rf") >= lr_best);
    out.insert("a: mlp >= lr".into(), total("mlp") >= lr_best);
    for (name, r) in &decision {
        let z = r.strata.zebra.as_ref().unwrap().metrics.primary();
        let nz = r.strata.non_zebra.as_ref().unwrap().metrics.primary();
        out.insert(format!("b: {name} zebra >= non_zebra"), z >= nz);
        out.insert(format!("c: {name} tta7 >= tta3"), tta_acc(r, 7.0) >= tta_acc(r, 3.0));
    }
    for task in Target::ALL {
        for family in [LogisticOrLinear, RandomForest, Mlp] {
            let all = if task == Target::Decision && family != ModelFamily::SvmLinear {
                decision
                    .iter()
                    .find(|(n, _)| *n == family.short())
                    .map(|(_, r)| r.aggregate.primary())
                    .unwrap()
            } else {
                cv(task, family, ablation_full_set(task))?.aggregate.primary()
            };
            let sub4 = cv(task, family, FeatureSet::Subset4)?.aggregate.primary();
            out.insert(
                format!("d: {} {task} all vs subset4", family.short()),
                better(task, all, sub4),
            );
        }
    }
    out.insert(
        "e: mean cd zebra > non_zebra".into(),
        mean_cd(&trials, Location::Zebra) > mean_cd(&trials, Location::NonZebra),
    );
    Ok(out)
}

fn qualitative() -> Outcome {
    let mut tally: BTreeMap<String, usize> = BTreeMap::new();
    let mut slowest = Duration::ZERO;
    for seed in 0..QUALITATIVE_SEEDS {
        let start = Instant::now();
        for (name, ok) in qualitative_seed(seed)? {
            *tally.entry(name).or_default() += usize::from(ok);
        }
        slowest = slowest.max(within(Duration::from_secs(120), start)?);
    }
    let mut failing = Vec::new();
    for (name, count) in &tally {
        println!("      {count:>2}/{QUALITATIVE_SEEDS}  {name}");
        if *count < QUALITATIVE_MAJORITY {
            failing.push(format!("{name} ({count}/{QUALITATIVE_SEEDS})"));
        }
    }
    if failing.is_empty() {
        Ok(format!(
            "{} sub-checks each hold in >= {QUALITATIVE_MAJORITY}/{QUALITATIVE_SEEDS} seeds, slowest seed {slowest:.1?}",
            tally.len()
        ))
    } else {
        Err(format!("below majority: {}", failing.join(", ")))
    }
}

fn read_tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn reproducible_grid() -> Outcome {
    let start = Instant::now();
    let trials = default_trials(0);
    let dir = tempfile::tempdir().unwrap();
    let mut trees = Vec::new();
    let mut reports = 0;
    for run in ["first", "second"] {
        let plan = ExperimentPlan {
            out_dir: dir.path().join(run),
            ..ExperimentPlan::default()
        };
        let grid = run_plan(&plan, &trials).map_err(|e| e.to_string())?;
        let ablation = run_ablation(&plan, &trials).map_err(|e| e.to_string())?;
        if !grid.succeeded() || !ablation.succeeded() {
            return Err(format!("cell failures: {:?} {:?}", grid.failures, ablation.failures));
        }
        reports = grid.reports.len();
        trees.push(read_tree(&plan.out_dir));
    }
    let took = within(Duration::from_secs(600), start)?;
    check(
        reports == 11 && trees[0] == trees[1],
        format!(
            "{reports} reports, {} files byte-identical across runs, {took:.1?}",
            trees[0].len()
        ),
    )
}

fn save_load() -> Outcome {
    let trials = default_trials(1);
    let dir = tempfile::tempdir().unwrap();
    let mut done = Vec::new();
    for family in ModelFamily::ALL {
        for target in Target::ALL {
            if family == ModelFamily::SvmLinear && target != Target::Decision {
                continue;
            }
            let data = task_trials(&trials, target);
            let x = encode(&data, FeatureSet::OursDelta).map_err(|e| e.to_string())?;
            let all: Vec<usize> = (0..x.n_rows()).collect();
            let x = Standardizer::fit(&x, &all)
                .and_then(|s| s.apply(&x))
                .map_err(|e| e.to_string())?;
            let y = pedcross::evaluation::targets(&data, target).map_err(|e| e.to_string())?;
            let model = train(&ModelSpec::new(family, target.task(), 4), &x, &y).map_err(|e| e.to_string())?;
            let path = dir.path().join(format!("{}_{target}.json", family.short()));
            save_model(&model, &path).map_err(|e| e.to_string())?;
            let loaded = load_model(&path).map_err(|e| e.to_string())?;
            let a = predict(&model, &x).map_err(|e| e.to_string())?;
            let b = predict(&loaded, &x).map_err(|e| e.to_string())?;
            if a.iter().zip(&b).any(|(p, q)| p.to_bits() != q.to_bits()) {
                return Err(format!("{} {target}: predictions differ after reload", family.name()));
            }
            done.push(format!("{}/{target}", family.short()));
        }
    }
    check(true, format!("bit-identical predictions for {}", done.join(" ")))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("1 metric oracles vs brute force", metric_oracles),
        ("2 worked values", worked_values),
        ("3 MLP gradient vs finite differences", mlp_gradient_check),
        ("4 CV hygiene", cv_hygiene),
        ("5 encoder", encoder_checks),
        ("6 planted rule tta >= 5", planted_rule),
        ("7 qualitative checks over seeds", qualitative),
        ("8 full grid reproducible", reproducible_grid),
        ("9 save/load round trip", save_load),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        match run() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!("{} of {} criteria passed", 9 - failed, 9);
    if failed > 0 {
        std::process::exit(1);
    }
}
