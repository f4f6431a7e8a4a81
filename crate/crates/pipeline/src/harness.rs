//! Experiment harness: cross-validated classification runs, feature
//! ablations, early-detection and train/test-horizon sweeps, and weekly
//! cohort trend tables, all written as CSV plus a text summary.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::time::Instant;

use thiserror::Error;

use cdrflow_core::cohort::{self, CohortConfig};
use cdrflow_core::error::CoreError;
use cdrflow_core::learner::{
    child_seed, evaluate, stratified_kfold, train_forest, train_logreg, Dataset, FeatureGroup,
    ForestConfig, LogRegConfig, Metrics, Model, Transform,
};
use cdrflow_core::model::{CohortLabel, TimeWindow, UserId};

use crate::features::{self, DataBundle};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{0}")]
    Core(#[from] CoreError),
    #[error("horizon {horizon} days does not fit the labeled period ending day {labeled_end}")]
    Horizon { horizon: u32, labeled_end: u32 },
    #[error("dataset mismatch: {0}")]
    Mismatch(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    MigrantVsLocal,
    LeavingVsStaying,
}

impl Task {
    pub fn dir_name(&self) -> &'static str {
        match self {
            Task::MigrantVsLocal => "migrant_local",
            Task::LeavingVsStaying => "churn",
        }
    }
}

#[derive(Debug, Clone)]
pub enum LearnerSpec {
    LogReg(LogRegConfig),
    Forest(ForestConfig),
}

impl LearnerSpec {
    pub fn name(&self) -> &'static str {
        match self {
            LearnerSpec::LogReg(_) => "logreg",
            LearnerSpec::Forest(_) => "forest",
        }
    }

    /// Trains on an already-transformed matrix; forests get a fold-local
    /// seed so folds stay independent yet reproducible.
    fn train(&self, ds: &Dataset, fold_seed: u64) -> Result<Model, CoreError> {
        match self {
            LearnerSpec::LogReg(cfg) => Ok(Model::Linear(train_logreg(ds, cfg)?)),
            LearnerSpec::Forest(cfg) => {
                let cfg = ForestConfig {
                    seed: fold_seed,
                    ..cfg.clone()
                };
                Ok(Model::Forest(train_forest(ds, &cfg)?))
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub task: Task,
    pub k_days: u32,
    /// Test-time feature horizon; defaults to `k_days`.
    pub t_days: Option<u32>,
    pub folds: usize,
    pub learner: LearnerSpec,
    pub seed: u64,
}

impl ExperimentConfig {
    fn fold_seed(&self) -> u64 {
        let tag = match self.task {
            Task::MigrantVsLocal => 0x11,
            Task::LeavingVsStaying => 0x22,
        };
        child_seed(self.seed, tag)
    }

    fn echo(&self, name: &str) -> String {
        format!(
            "task={} experiment={} learner={} k_days={} t_days={} folds={} seed={}",
            self.task.dir_name(),
            name,
            self.learner.name(),
            self.k_days,
            self.t_days.unwrap_or(self.k_days),
            self.folds,
            self.seed,
        )
    }
}

/// One cross-validated run.
#[derive(Debug, Clone)]
pub struct Report {
    pub name: String,
    pub folds: Vec<Metrics>,
    pub mean: Metrics,
    /// Per-feature mean impurity decrease, averaged over folds and
    /// renormalized; forests only.
    pub importances: Option<Vec<(String, f64)>>,
    pub config_echo: String,
    /// Wall-clock seconds; reported to stderr only, never serialized,
    /// so identical seeds yield byte-identical files.
    pub runtime_secs: f64,
}

/// Builds the per-task design matrix: one row per in-scope user with
/// features over the first `horizon_days` of that user's observation
/// clock (migrants: days since first activity; locals: the calendar
/// window starting at week 1).
pub fn assemble_features(
    bundle: &DataBundle,
    labels: &HashMap<UserId, CohortLabel>,
    cohort: &CohortConfig,
    horizon_days: u32,
    task: Task,
) -> Result<Dataset, HarnessError> {
    let labeled_end = cohort.labeled_end_day();
    // The latest possible migrant start is the last day of week 1.
    let latest_start = cohort.week1.end_day.saturating_sub(1);
    if latest_start + horizon_days > labeled_end {
        return Err(HarnessError::Horizon {
            horizon: horizon_days,
            labeled_end,
        });
    }
    let activity = cohort::activity_days(&bundle.records, bundle.epoch);
    let first_day = |u: &UserId| activity.get(u).and_then(|d| d.iter().next().copied());

    let mut sorted: Vec<(&UserId, &CohortLabel)> = labels.iter().collect();
    sorted.sort_unstable_by_key(|(u, _)| **u);
    let mut by_start: BTreeMap<u32, Vec<(UserId, u8)>> = BTreeMap::new();
    for (u, label) in sorted {
        let (y, start) = match (task, label) {
            (Task::MigrantVsLocal, CohortLabel::Local) => (0, Some(cohort.week1.start_day)),
            (Task::MigrantVsLocal, CohortLabel::StayingMigrant)
            | (Task::MigrantVsLocal, CohortLabel::LeavingMigrant) => (1, first_day(u)),
            (Task::LeavingVsStaying, CohortLabel::StayingMigrant) => (0, first_day(u)),
            (Task::LeavingVsStaying, CohortLabel::LeavingMigrant) => (1, first_day(u)),
            _ => continue,
        };
        // Labeled migrants are active by construction; skip defensively
        // if not.
        let Some(start) = start else { continue };
        by_start.entry(start).or_default().push((*u, y));
    }

    let names: Vec<String> = features::FEATURE_COLUMNS
        .iter()
        .map(|(n, _)| n.to_string())
        .collect();
    let groups: Vec<FeatureGroup> = features::FEATURE_COLUMNS.iter().map(|(_, g)| *g).collect();
    let mut ds = Dataset::new(names.len(), names, groups);
    for (start, users) in &by_start {
        let window = TimeWindow::new(*start, start + horizon_days);
        let sub = features::feature_matrix(bundle, users, window);
        for r in 0..sub.n_rows {
            ds.push_row(sub.row_ids[r], sub.row(r), sub.y[r]);
        }
    }

    if task == Task::MigrantVsLocal {
        // Birthplace trivially separates migrants from locals, so the
        // townsman fraction sits out of this task.
        let keep: Vec<usize> = ds
            .feature_names
            .iter()
            .enumerate()
            .filter(|(_, n)| n.as_str() != "townsman_frac")
            .map(|(i, _)| i)
            .collect();
        ds = ds.select_columns(&keep);
    }
    Ok(ds)
}

/// Stratified folds keyed only by labels + seed, so every experiment
/// over the same user set shares assignments (paired comparisons).
pub fn fold_assignments(
    cfg: &ExperimentConfig,
    y: &[u8],
) -> Result<Vec<(Vec<usize>, Vec<usize>)>, HarnessError> {
    Ok(stratified_kfold(y, cfg.folds, cfg.fold_seed())?)
}

fn cv_with_folds(
    cfg: &ExperimentConfig,
    name: &str,
    ds: &Dataset,
    folds: &[(Vec<usize>, Vec<usize>)],
) -> Result<Report, HarnessError> {
    let start = Instant::now();
    let mut fold_metrics = Vec::with_capacity(folds.len());
    let mut importance_sum: Vec<f64> = vec![0.0; ds.n_cols];
    let mut forest_folds = 0usize;
    for (f, (train_idx, test_idx)) in folds.iter().enumerate() {
        let train = ds.select_rows(train_idx);
        let test = ds.select_rows(test_idx);
        let tr = Transform::fit(&train);
        let train_t = tr.apply(&train);
        let test_t = tr.apply(&test);
        let model = cfg.learner.train(&train_t, child_seed(cfg.fold_seed(), f as u64))?;
        let pred = model.predict_labels(&test_t)?;
        fold_metrics.push(evaluate(&pred, &test_t.y, 1));
        if let Model::Forest(forest) = &model {
            forest_folds += 1;
            // Transform may drop all-missing columns; map importances
            // back through the surviving names.
            for (name, imp) in forest.named_importances(&train_t.feature_names) {
                if let Some(i) = ds.feature_names.iter().position(|n| *n == name) {
                    importance_sum[i] += imp;
                }
            }
        }
    }
    let mean = Metrics::mean(&fold_metrics);
    let importances = (forest_folds > 0).then(|| {
        let total: f64 = importance_sum.iter().sum();
        ds.feature_names
            .iter()
            .cloned()
            .zip(importance_sum.iter().map(|v| {
                if total > 0.0 {
                    v / total
                } else {
                    0.0
                }
            }))
            .collect()
    });
    Ok(Report {
        name: name.to_string(),
        folds: fold_metrics,
        mean,
        importances,
        config_echo: cfg.echo(name),
        runtime_secs: start.elapsed().as_secs_f64(),
    })
}

/// Plain stratified cross-validation.
pub fn run_cv(cfg: &ExperimentConfig, ds: &Dataset) -> Result<Report, HarnessError> {
    let folds = fold_assignments(cfg, &ds.y)?;
    cv_with_folds(cfg, "cv", ds, &folds)
}

/// One row per feature group plus the all-features row; a group with no
/// columns yields `None` (skipped).
pub fn run_ablation(
    cfg: &ExperimentConfig,
    ds: &Dataset,
) -> Result<Vec<(String, Option<Report>)>, HarnessError> {
    let folds = fold_assignments(cfg, &ds.y)?;
    let mut rows = Vec::with_capacity(FeatureGroup::ALL.len() + 1);
    rows.push(("all".to_string(), Some(cv_with_folds(cfg, "all", ds, &folds)?)));
    for group in FeatureGroup::ALL {
        let cols = ds.group_columns(group);
        if cols.is_empty() {
            rows.push((group.as_str().to_string(), None));
            continue;
        }
        let sub = ds.select_columns(&cols);
        rows.push((
            group.as_str().to_string(),
            Some(cv_with_folds(cfg, group.as_str(), &sub, &folds)?),
        ));
    }
    Ok(rows)
}

fn check_same_cohort(ds_by_k: &BTreeMap<u32, Dataset>) -> Result<&Dataset, HarnessError> {
    let mut iter = ds_by_k.values();
    let first = iter
        .next()
        .ok_or_else(|| HarnessError::Mismatch("no horizons given".into()))?;
    for ds in iter {
        if ds.y != first.y || ds.row_ids != first.row_ids {
            return Err(HarnessError::Mismatch(
                "horizon datasets cover different user sets".into(),
            ));
        }
    }
    Ok(first)
}

/// Precision/recall/F1 versus feature horizon k, with fold assignments
/// shared across horizons.
pub fn run_early_detection(
    cfg: &ExperimentConfig,
    ds_by_k: &BTreeMap<u32, Dataset>,
) -> Result<Vec<(u32, Report)>, HarnessError> {
    let first = check_same_cohort(ds_by_k)?;
    let folds = fold_assignments(cfg, &first.y)?;
    let mut series = Vec::with_capacity(ds_by_k.len());
    for (&k, ds) in ds_by_k {
        let cfg_k = ExperimentConfig {
            k_days: k,
            t_days: None,
            ..cfg.clone()
        };
        series.push((k, cv_with_folds(&cfg_k, &format!("k{k}"), ds, &folds)?));
    }
    Ok(series)
}

/// Train on k-day features, evaluate the same held-out users on t-day
/// features. Cells with t < k are not computed.
pub fn run_disentanglement(
    cfg: &ExperimentConfig,
    k_list: &[u32],
    t_list: &[u32],
    ds_by_horizon: &BTreeMap<u32, Dataset>,
) -> Result<Vec<Vec<Option<Metrics>>>, HarnessError> {
    for h in k_list.iter().chain(t_list) {
        if !ds_by_horizon.contains_key(h) {
            return Err(HarnessError::Mismatch(format!("no dataset for horizon {h}")));
        }
    }
    let first = check_same_cohort(ds_by_horizon)?;
    let folds = fold_assignments(cfg, &first.y)?;
    let mut matrix = vec![vec![None; t_list.len()]; k_list.len()];
    for (ki, &k) in k_list.iter().enumerate() {
        let ds_k = &ds_by_horizon[&k];
        // One model per fold at horizon k, reused for every t.
        let mut per_t: Vec<Vec<Metrics>> = vec![Vec::new(); t_list.len()];
        for (f, (train_idx, test_idx)) in folds.iter().enumerate() {
            let train = ds_k.select_rows(train_idx);
            let tr = Transform::fit(&train);
            let train_t = tr.apply(&train);
            let model = cfg
                .learner
                .train(&train_t, child_seed(cfg.fold_seed(), f as u64))?;
            for (ti, &t) in t_list.iter().enumerate() {
                if t < k {
                    continue;
                }
                let test = ds_by_horizon[&t].select_rows(test_idx);
                let test_t = tr.apply(&test);
                let pred = model.predict_labels(&test_t)?;
                per_t[ti].push(evaluate(&pred, &test_t.y, 1));
            }
        }
        for (ti, fold_metrics) in per_t.into_iter().enumerate() {
            if !fold_metrics.is_empty() {
                matrix[ki][ti] = Some(Metrics::mean(&fold_metrics));
            }
        }
    }
    Ok(matrix)
}

/// One weekly mean/standard-error row per (cohort, week, feature);
/// leaving migrants are absent by definition in week 3.
#[derive(Debug, Clone)]
pub struct TrendRow {
    pub cohort: CohortLabel,
    pub week: usize,
    pub feature: String,
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

pub fn run_trends(
    bundle: &DataBundle,
    labels: &HashMap<UserId, CohortLabel>,
    cohort_cfg: &CohortConfig,
) -> Vec<TrendRow> {
    let weeks = [cohort_cfg.week1, cohort_cfg.week2, cohort_cfg.week3];
    let mut rows = Vec::new();
    for (wi, window) in weeks.iter().enumerate() {
        let week = wi + 1;
        let mut users: Vec<(UserId, u8)> = labels
            .iter()
            .filter(|(_, l)| {
                matches!(
                    l,
                    CohortLabel::Local | CohortLabel::StayingMigrant | CohortLabel::LeavingMigrant
                ) && !(week == 3 && **l == CohortLabel::LeavingMigrant)
            })
            .map(|(u, _)| (*u, 0))
            .collect();
        users.sort_unstable_by_key(|(u, _)| *u);
        let ds = features::feature_matrix(bundle, &users, *window);
        for cohort in [
            CohortLabel::Local,
            CohortLabel::StayingMigrant,
            CohortLabel::LeavingMigrant,
        ] {
            if week == 3 && cohort == CohortLabel::LeavingMigrant {
                continue;
            }
            let member_rows: Vec<usize> = (0..ds.n_rows)
                .filter(|&r| labels.get(&ds.row_ids[r]) == Some(&cohort))
                .collect();
            for c in 0..ds.n_cols {
                let values: Vec<f64> = member_rows
                    .iter()
                    .map(|&r| ds.get(r, c))
                    .filter(|v| !v.is_nan())
                    .collect();
                let n = values.len();
                let (mean, stderr) = if n == 0 {
                    (f64::NAN, f64::NAN)
                } else {
                    let mean = values.iter().sum::<f64>() / n as f64;
                    let var =
                        values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
                    (mean, (var / n as f64).sqrt())
                };
                rows.push(TrendRow {
                    cohort,
                    week,
                    feature: ds.feature_names[c].clone(),
                    mean,
                    stderr,
                    n,
                });
            }
        }
    }
    rows
}

fn fmt(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v:.6}")
    }
}

fn metrics_record(label: &str, m: &Metrics) -> Vec<String> {
    vec![
        label.to_string(),
        fmt(m.precision),
        fmt(m.recall),
        fmt(m.f1),
        m.tp.to_string(),
        m.fp.to_string(),
        m.tn.to_string(),
        m.fn_.to_string(),
    ]
}

/// Writes summary.txt, metrics.csv, and (for forests) importances.csv.
pub fn write_report(dir: &Path, report: &Report) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join("metrics.csv"))?;
    w.write_record(["fold", "precision", "recall", "f1", "tp", "fp", "tn", "fn"])?;
    for (i, m) in report.folds.iter().enumerate() {
        w.write_record(metrics_record(&(i + 1).to_string(), m))?;
    }
    w.write_record(metrics_record("mean", &report.mean))?;
    w.flush()?;

    if let Some(imps) = &report.importances {
        let mut sorted: Vec<(usize, &(String, f64))> = imps.iter().enumerate().collect();
        // Descending importance, ties by feature order.
        sorted.sort_by(|(ia, (_, va)), (ib, (_, vb))| {
            vb.partial_cmp(va).unwrap().then(ia.cmp(ib))
        });
        let mut w = csv::Writer::from_path(dir.join("importances.csv"))?;
        w.write_record(["feature", "importance"])?;
        for (_, (name, v)) in sorted {
            w.write_record([name.clone(), format!("{v:.6}")])?;
        }
        w.flush()?;
    }

    let mut text = String::new();
    text.push_str(&format!("{}\n", report.config_echo));
    text.push_str("fold  precision  recall  f1\n");
    for (i, m) in report.folds.iter().enumerate() {
        text.push_str(&format!(
            "{:<5} {:<10.4} {:<7.4} {:.4}\n",
            i + 1,
            m.precision,
            m.recall,
            m.f1
        ));
    }
    text.push_str(&format!(
        "mean  {:<10.4} {:<7.4} {:.4}\n",
        report.mean.precision, report.mean.recall, report.mean.f1
    ));
    std::fs::write(dir.join("summary.txt"), text)
}

/// Ablation table: one metrics row per feature-group run.
pub fn write_ablation(dir: &Path, rows: &[(String, Option<Report>)]) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join("metrics.csv"))?;
    w.write_record(["feature_set", "precision", "recall", "f1", "tp", "fp", "tn", "fn"])?;
    let mut text = String::from("feature_set  precision  recall  f1\n");
    for (name, report) in rows {
        match report {
            Some(rep) => {
                w.write_record(metrics_record(name, &rep.mean))?;
                text.push_str(&format!(
                    "{:<12} {:<10.4} {:<7.4} {:.4}\n",
                    name, rep.mean.precision, rep.mean.recall, rep.mean.f1
                ));
            }
            None => {
                w.write_record([name.as_str(), "", "", "", "", "", "", ""])?;
                text.push_str(&format!("{name:<12} skipped (no columns)\n"));
            }
        }
    }
    w.flush()?;
    std::fs::write(dir.join("summary.txt"), text)
}

/// Early-detection series: one metrics row per horizon k.
pub fn write_series(dir: &Path, series: &[(u32, Report)]) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join("metrics.csv"))?;
    w.write_record(["k", "precision", "recall", "f1", "tp", "fp", "tn", "fn"])?;
    let mut text = String::from("k   precision  recall  f1\n");
    for (k, rep) in series {
        w.write_record(metrics_record(&k.to_string(), &rep.mean))?;
        text.push_str(&format!(
            "{:<3} {:<10.4} {:<7.4} {:.4}\n",
            k, rep.mean.precision, rep.mean.recall, rep.mean.f1
        ));
    }
    w.flush()?;
    std::fs::write(dir.join("summary.txt"), text)
}

/// Disentanglement matrix: one row per computed (k, t) cell.
pub fn write_matrix(
    dir: &Path,
    k_list: &[u32],
    t_list: &[u32],
    matrix: &[Vec<Option<Metrics>>],
) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join("metrics.csv"))?;
    w.write_record(["k", "t", "precision", "recall", "f1"])?;
    let mut text = String::from("k   t   precision  recall  f1\n");
    for (ki, &k) in k_list.iter().enumerate() {
        for (ti, &t) in t_list.iter().enumerate() {
            if let Some(m) = &matrix[ki][ti] {
                w.write_record([
                    k.to_string(),
                    t.to_string(),
                    fmt(m.precision),
                    fmt(m.recall),
                    fmt(m.f1),
                ])?;
                text.push_str(&format!(
                    "{:<3} {:<3} {:<10.4} {:<7.4} {:.4}\n",
                    k, t, m.precision, m.recall, m.f1
                ));
            }
        }
    }
    w.flush()?;
    std::fs::write(dir.join("summary.txt"), text)
}

/// Weekly cohort trend table.
pub fn write_trends(dir: &Path, rows: &[TrendRow]) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join("trends.csv"))?;
    w.write_record(["cohort", "week", "feature", "mean", "stderr", "n"])?;
    for r in rows {
        w.write_record([
            r.cohort.as_str().to_string(),
            r.week.to_string(),
            r.feature.clone(),
            fmt(r.mean),
            fmt(r.stderr),
            r.n.to_string(),
        ])?;
    }
    w.flush()
}
