//! `cdrflow` CLI: generate synthetic CDR bundles and run the analysis
//! pipeline (ingest → label → featurize → experiments) from one TOML
//! config. Exit codes: 0 success, 1 runtime failure, 2 config error.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cdrflow::config::{ConfigError, RunConfig};
use cdrflow::features::DataBundle;
use cdrflow::harness::{self, ExperimentConfig, HarnessError, LearnerSpec, Task};
use cdrflow::ingest::{self, HighDegreeRule};
use cdrflow::synth;

use cdrflow_core::geofeat::PriceIndex;
use cdrflow_core::learner::{Dataset, ForestConfig, LogRegConfig};
use cdrflow_core::{cohort, CohortLabel};

#[derive(Parser)]
#[command(
    name = "cdrflow",
    about = "CDR analytics: synthetic benchmarks, migrant-integration features, churn experiments"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic bundle: calls, profiles, estates, ground truth.
    Synth(CommonArgs),
    /// Run ingest → label → featurize → the selected experiments.
    Pipeline {
        #[command(flatten)]
        common: CommonArgs,
        /// Which experiment(s) to run.
        #[arg(long, value_enum, default_value_t = Selector::All)]
        experiment: Selector,
    },
}

#[derive(Args)]
struct CommonArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the config-file seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: config value, else all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Abort on rejected input rows / failed generator validation.
    #[arg(long)]
    strict: bool,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Selector {
    MigrantLocal,
    Churn,
    Ablation,
    Early,
    Disentangle,
    Trends,
    All,
}

impl Selector {
    fn wants(self, other: Selector) -> bool {
        self == Selector::All || self == other
    }
}

enum AppError {
    /// Exit 2.
    Config(String),
    /// Exit 1.
    Runtime(String),
}

impl From<ConfigError> for AppError {
    fn from(e: ConfigError) -> Self {
        AppError::Config(e.to_string())
    }
}

impl From<synth::SynthError> for AppError {
    fn from(e: synth::SynthError) -> Self {
        match e {
            synth::SynthError::Infeasible(_) => AppError::Config(e.to_string()),
            synth::SynthError::Io(_) => AppError::Runtime(e.to_string()),
        }
    }
}

impl From<HarnessError> for AppError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Horizon { .. } => AppError::Config(e.to_string()),
            other => AppError::Runtime(other.to_string()),
        }
    }
}

fn main() {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(()) => 0,
        Err(AppError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(AppError::Config(msg)) => {
            eprintln!("config error: {msg}");
            2
        }
    };
    std::process::exit(code);
}

fn stage<T>(name: &str, f: impl FnOnce() -> T) -> T {
    let t0 = Instant::now();
    let out = f();
    eprintln!("[stage] {name}: {:.2}s", t0.elapsed().as_secs_f64());
    out
}

fn run(cli: Cli) -> Result<(), AppError> {
    match cli.cmd {
        Cmd::Synth(args) => {
            let (cfg, pool) = load(&args)?;
            pool.install(|| cmd_synth(&cfg, &args))
        }
        Cmd::Pipeline { common, experiment } => {
            let (cfg, pool) = load(&common)?;
            pool.install(|| cmd_pipeline(&cfg, &common, experiment))
        }
    }
}

/// Loads config, applies CLI overrides, and builds the worker pool.
fn load(args: &CommonArgs) -> Result<(RunConfig, rayon::ThreadPool), AppError> {
    let mut cfg = RunConfig::from_file(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| AppError::Runtime(format!("worker pool: {e}")))?;
    Ok((cfg, pool))
}

fn cmd_synth(cfg: &RunConfig, args: &CommonArgs) -> Result<(), AppError> {
    let gen_cfg = synth::GeneratorConfig {
        seed: cfg.seed,
        ..cfg.generator.clone()
    };
    let out = stage("generate", || synth::generate(&gen_cfg))?;
    let report = stage("validate", || synth::validate(&out, &gen_cfg));
    for v in &report.violations {
        eprintln!("validation: {}", v.0);
    }
    stage("write", || synth::write_bundle(&args.out, &out))
        .map_err(|e| AppError::Runtime(e.to_string()))?;
    eprintln!(
        "wrote {} calls, {} profiles, {} estates to {}",
        out.records.len(),
        out.profiles.len(),
        out.estates.len(),
        args.out.display()
    );
    if args.strict && !report.passed() {
        return Err(AppError::Runtime(format!(
            "generator validation failed: {} violation(s)",
            report.violations.len()
        )));
    }
    Ok(())
}

fn cmd_pipeline(cfg: &RunConfig, args: &CommonArgs, selector: Selector) -> Result<(), AppError> {
    cfg.check_paths()?;
    let strict = args.strict;
    fn runtime(stage_name: &'static str) -> impl Fn(ingest::IngestError) -> AppError {
        move |e| AppError::Runtime(format!("{stage_name}: {e}"))
    }

    // Ingest.
    let (mut records, call_stats) = stage("ingest calls", || {
        ingest::parse_call_log(&cfg.paths.calls, strict)
    })
    .map_err(runtime("ingest calls"))?;
    let (profiles, profile_stats) = stage("ingest profiles", || {
        ingest::parse_profiles(&cfg.paths.profiles, cfg.ingest.home_province)
    })
    .map_err(runtime("ingest profiles"))?;
    let (estates, estate_stats) = stage("ingest estates", || {
        ingest::parse_estates(&cfg.paths.estates)
    })
    .map_err(runtime("ingest estates"))?;
    eprintln!(
        "parsed: {} calls ({} rejected), {} profiles ({} rejected), {} estates ({} rejected)",
        call_stats.accepted,
        call_stats.rejected,
        profile_stats.accepted,
        profile_stats.rejected,
        estate_stats.accepted,
        estate_stats.rejected
    );
    if let Some(alias_path) = &cfg.paths.aliases {
        let (aliases, _) = ingest::parse_aliases(alias_path).map_err(runtime("ingest aliases"))?;
        let (canonical, dropped) = ingest::apply_aliases(records, &aliases);
        records = canonical;
        eprintln!("aliases: {} users folded, {dropped} self-calls dropped", aliases.len());
    }
    if cfg.ingest.high_degree_cap > 0 {
        let (kept, removed) = stage("high-degree filter", || {
            ingest::filter_high_degree(records, HighDegreeRule::Absolute(cfg.ingest.high_degree_cap))
        });
        records = kept;
        eprintln!("high-degree filter removed {} users", removed.len());
    }

    // Label.
    let label_result = stage("label", || {
        cohort::label_users(&records, &profiles, &cfg.cohort, cfg.epoch)
    });
    let count = |l: CohortLabel| {
        label_result
            .labels
            .values()
            .filter(|v| **v == l)
            .count()
    };
    eprintln!(
        "cohorts: {} locals, {} staying, {} leaving, {} excluded ({} active users unprofiled)",
        count(CohortLabel::Local),
        count(CohortLabel::StayingMigrant),
        count(CohortLabel::LeavingMigrant),
        count(CohortLabel::Excluded),
        label_result.unprofiled_active
    );

    let price_index = PriceIndex::build(estates, cfg.geo.cell_size_deg)
        .map_err(|e| AppError::Runtime(format!("price index: {e}")))?;
    let bundle = DataBundle {
        records,
        profiles,
        price_index,
        epoch: cfg.epoch,
        geo: cfg.geo.clone(),
    };
    let labels = &label_result.labels;

    let exp = &cfg.experiment;
    let logreg = LearnerSpec::LogReg(LogRegConfig {
        l2: exp.l2,
        ..LogRegConfig::default()
    });
    let forest = LearnerSpec::Forest(ForestConfig {
        n_trees: exp.n_trees,
        max_depth: exp.max_depth,
        ..ForestConfig::default()
    });
    let base = |task: Task, learner: &LearnerSpec| ExperimentConfig {
        task,
        k_days: exp.horizon_days,
        t_days: None,
        folds: exp.folds,
        learner: learner.clone(),
        seed: cfg.seed,
    };
    let reports_dir = args.out.join("reports");
    let mut summary: Vec<(String, f64, f64, f64)> = Vec::new();
    let mut push_summary = |name: String, rep: &harness::Report| {
        summary.push((name, rep.mean.precision, rep.mean.recall, rep.mean.f1));
    };

    if selector.wants(Selector::MigrantLocal) {
        let ds = stage("features migrant-local", || {
            harness::assemble_features(
                &bundle,
                labels,
                &cfg.cohort,
                exp.horizon_days,
                Task::MigrantVsLocal,
            )
        })?;
        for learner in [&logreg, &forest] {
            let cfg_run = base(Task::MigrantVsLocal, learner);
            let rep = stage(&format!("migrant-local {}", learner.name()), || {
                harness::run_cv(&cfg_run, &ds)
            })?;
            write(
                &reports_dir.join("migrant_local").join(learner.name()),
                |d| harness::write_report(d, &rep),
            )?;
            push_summary(format!("migrant-local/{}", learner.name()), &rep);
        }
        let cfg_run = base(Task::MigrantVsLocal, &forest);
        let rows = stage("migrant-local ablation", || {
            harness::run_ablation(&cfg_run, &ds)
        })?;
        write(&reports_dir.join("migrant_local").join("ablation"), |d| {
            harness::write_ablation(d, &rows)
        })?;
    }

    // Churn-task feature matrices are shared by several selectors;
    // build lazily per horizon.
    let mut churn_ds: BTreeMap<u32, Dataset> = BTreeMap::new();
    let churn_at = |k: u32, churn_ds: &mut BTreeMap<u32, Dataset>| -> Result<(), AppError> {
        if !churn_ds.contains_key(&k) {
            let ds = stage(&format!("features churn k={k}"), || {
                harness::assemble_features(&bundle, labels, &cfg.cohort, k, Task::LeavingVsStaying)
            })?;
            churn_ds.insert(k, ds);
        }
        Ok(())
    };

    if selector.wants(Selector::Churn) {
        churn_at(exp.horizon_days, &mut churn_ds)?;
        let ds = &churn_ds[&exp.horizon_days];
        for learner in [&logreg, &forest] {
            let cfg_run = base(Task::LeavingVsStaying, learner);
            let rep = stage(&format!("churn {}", learner.name()), || {
                harness::run_cv(&cfg_run, ds)
            })?;
            write(&reports_dir.join("churn").join(learner.name()), |d| {
                harness::write_report(d, &rep)
            })?;
            push_summary(format!("churn/{}", learner.name()), &rep);
        }
    }

    if selector.wants(Selector::Ablation) {
        churn_at(exp.horizon_days, &mut churn_ds)?;
        let cfg_run = base(Task::LeavingVsStaying, &forest);
        let rows = stage("churn ablation", || {
            harness::run_ablation(&cfg_run, &churn_ds[&exp.horizon_days])
        })?;
        write(&reports_dir.join("churn").join("ablation"), |d| {
            harness::write_ablation(d, &rows)
        })?;
        for (name, rep) in &rows {
            if let Some(rep) = rep {
                push_summary(format!("churn/ablation/{name}"), rep);
            }
        }
    }

    if selector.wants(Selector::Early) {
        for k in exp.early_k_min..=exp.early_k_max {
            churn_at(k, &mut churn_ds)?;
        }
        let cfg_run = base(Task::LeavingVsStaying, &forest);
        let in_range: BTreeMap<u32, Dataset> = churn_ds
            .iter()
            .filter(|(k, _)| (exp.early_k_min..=exp.early_k_max).contains(k))
            .map(|(k, v)| (*k, v.clone()))
            .collect();
        let series = stage("churn early-detection", || {
            harness::run_early_detection(&cfg_run, &in_range)
        })?;
        write(&reports_dir.join("churn").join("early"), |d| {
            harness::write_series(d, &series)
        })?;
        for (k, rep) in &series {
            push_summary(format!("churn/early/k{k}"), rep);
        }
    }

    if selector.wants(Selector::Disentangle) {
        for &h in exp.disentangle_k.iter().chain(&exp.disentangle_t) {
            churn_at(h, &mut churn_ds)?;
        }
        let cfg_run = base(Task::LeavingVsStaying, &forest);
        let matrix = stage("churn disentanglement", || {
            harness::run_disentanglement(&cfg_run, &exp.disentangle_k, &exp.disentangle_t, &churn_ds)
        })?;
        write(&reports_dir.join("churn").join("disentangle"), |d| {
            harness::write_matrix(d, &exp.disentangle_k, &exp.disentangle_t, &matrix)
        })?;
    }

    if selector.wants(Selector::Trends) {
        let rows = stage("weekly trends", || {
            harness::run_trends(&bundle, labels, &cfg.cohort)
        });
        write(&reports_dir.join("cohorts").join("trends"), |d| {
            harness::write_trends(d, &rows)
        })?;
    }

    if !summary.is_empty() {
        println!("{:<28} {:>9} {:>7} {:>7}", "experiment", "precision", "recall", "f1");
        for (name, p, r, f1) in &summary {
            println!("{name:<28} {p:>9.4} {r:>7.4} {f1:>7.4}");
        }
    }
    eprintln!("reports written under {}", reports_dir.display());
    Ok(())
}

fn write(
    dir: &Path,
    f: impl FnOnce(&Path) -> std::io::Result<()>,
) -> Result<(), AppError> {
    f(dir).map_err(|e| AppError::Runtime(format!("writing {}: {e}", dir.display())))
}
