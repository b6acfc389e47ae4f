//! Experiment orchestration: repeated random splits, every method on the
//! same split, CSV reports.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anneal::{trace_to_csv, AnnealSchedule, AnnealTraceRow, InitMode};
use crate::dataset::{Dataset, Label};
use crate::ensemble::{
    build_adaboost, build_bagging, build_false_label_ensemble_traced, EnsembleModel, FalseLabelConfig,
};
use crate::error::{Error, Result};
use crate::hmrf::EnergySettings;
use crate::naive_bayes::NaiveBayesModel;
use crate::rng::derive_seed;
use crate::stats::{diff_vs_best, friedman_test, summarize, FriedmanBlocks, MethodScores};
use crate::synth::generate_synthetic;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Baseline {
    #[serde(rename = "nb", alias = "NB")]
    NaiveBayes,
    #[serde(rename = "bagging", alias = "BAGGING")]
    Bagging,
    #[serde(rename = "adaboost", alias = "ADABOOST")]
    AdaBoost,
}

impl Baseline {
    pub fn method_name(self) -> &'static str {
        match self {
            Baseline::NaiveBayes => "NB",
            Baseline::Bagging => "Bagging",
            Baseline::AdaBoost => "AdaBoost",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub sep: f64,
    pub dims: usize,
    pub count: usize,
    #[serde(default)]
    pub seed: u64,
}

/// One dataset of an experiment, read from a CSV file or generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default = "default_label_column")]
    pub label_column: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticSpec>,
}

fn default_label_column() -> String {
    "label".to_string()
}

impl DatasetSpec {
    pub fn csv(name: impl Into<String>, path: impl Into<PathBuf>, label_column: impl Into<String>) -> Self {
        DatasetSpec {
            name: name.into(),
            path: Some(path.into()),
            label_column: label_column.into(),
            synthetic: None,
        }
    }

    pub fn synthetic(name: impl Into<String>, spec: SyntheticSpec) -> Self {
        DatasetSpec {
            name: name.into(),
            path: None,
            label_column: default_label_column(),
            synthetic: Some(spec),
        }
    }

    /// Relative paths resolve against `base`.
    pub fn load(&self, base: Option<&Path>) -> Result<Dataset> {
        let d = match (&self.path, &self.synthetic) {
            (Some(p), None) => {
                let p = match base {
                    Some(b) if p.is_relative() => b.join(p),
                    _ => p.clone(),
                };
                Dataset::load_csv(&p, &self.label_column)?
            }
            (None, Some(s)) => generate_synthetic(s.sep, s.dims, s.count, s.seed)?,
            _ => {
                return Err(Error::InvalidConfig(format!(
                    "dataset {} needs exactly one of path and synthetic",
                    self.name
                )))
            }
        };
        Ok(d.with_name(self.name.clone()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub datasets: Vec<DatasetSpec>,
    pub ensemble_sizes: Vec<usize>,
    pub repetitions: usize,
    pub seed: u64,
    pub energy: EnergySettings,
    pub schedule: AnnealSchedule,
    pub init_mode: InitMode,
    pub max_resplits: usize,
    pub baselines: Vec<Baseline>,
    pub bagging_size: usize,
    pub adaboost_rounds: usize,
    pub output_dir: PathBuf,
    pub friedman_blocks: FriedmanBlocks,
    pub save_ensembles: bool,
    /// Keep every n-th annealing iteration in trace files (the last one is
    /// always kept); 0 disables traces.
    pub trace_stride: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            datasets: Vec::new(),
            ensemble_sizes: vec![3, 5, 7, 9, 11, 13, 15],
            repetitions: 10,
            seed: 0,
            energy: EnergySettings::default(),
            schedule: AnnealSchedule::default(),
            init_mode: InitMode::default(),
            max_resplits: 10,
            baselines: vec![Baseline::NaiveBayes, Baseline::Bagging, Baseline::AdaBoost],
            bagging_size: 10,
            adaboost_rounds: 10,
            output_dir: PathBuf::from("results"),
            friedman_blocks: FriedmanBlocks::default(),
            save_ensembles: true,
            trace_stride: 1,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    /// Reads a config; relative dataset paths and output directory are
    /// taken relative to the config file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json(&text)?;
        if let Some(base) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            for d in &mut cfg.datasets {
                if let Some(p) = d.path.as_mut().filter(|p| p.is_relative()) {
                    *p = base.join(&*p);
                }
            }
            if cfg.output_dir.is_relative() {
                cfg.output_dir = base.join(&cfg.output_dir);
            }
        }
        Ok(cfg)
    }

    pub fn false_label_config(&self) -> FalseLabelConfig {
        FalseLabelConfig {
            energy: self.energy.clone(),
            schedule: self.schedule.clone(),
            init_mode: self.init_mode,
            max_resplits: self.max_resplits,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.datasets.is_empty() {
            return bad("no datasets configured".into());
        }
        let mut names = BTreeSet::new();
        for d in &self.datasets {
            if !names.insert(&d.name) {
                return bad(format!("duplicate dataset name {}", d.name));
            }
            if d.name.is_empty() || d.name.contains(['/', '\\']) {
                return bad(format!("dataset name {:?} cannot be used in file names", d.name));
            }
            if d.path.is_some() == d.synthetic.is_some() {
                return bad(format!("dataset {} needs exactly one of path and synthetic", d.name));
            }
        }
        if self.ensemble_sizes.is_empty() && self.baselines.is_empty() {
            return bad("no methods configured".into());
        }
        if let Some(&l) = self.ensemble_sizes.iter().find(|&&l| l < 3 || l.is_multiple_of(2)) {
            return Err(Error::InvalidEnsembleSize(l));
        }
        if self.ensemble_sizes.iter().collect::<BTreeSet<_>>().len() != self.ensemble_sizes.len() {
            return bad("duplicate ensemble size".into());
        }
        if self.repetitions < 1 {
            return bad("repetitions must be at least 1".into());
        }
        if self.baselines.iter().collect::<BTreeSet<_>>().len() != self.baselines.len() {
            return bad("duplicate baseline".into());
        }
        if self.bagging_size < 1 || self.adaboost_rounds < 1 {
            return bad("bagging_size and adaboost_rounds must be at least 1".into());
        }
        self.energy.validate()?;
        self.schedule.validate()?;
        Ok(())
    }

    /// Method names in report column order: ensemble sizes ascending, then
    /// baselines as configured.
    pub fn methods(&self) -> Vec<String> {
        let mut sizes = self.ensemble_sizes.clone();
        sizes.sort_unstable();
        sizes
            .iter()
            .map(|l| format!("D{l}"))
            .chain(self.baselines.iter().map(|b| b.method_name().to_string()))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub dataset: String,
    pub method: String,
    pub split_index: usize,
    pub accuracy: f64,
    pub wall_time_micros: u64,
    pub seed_used: u64,
    /// Identifies the evaluation half; equal for every method of one
    /// (dataset, split).
    pub split_fingerprint: u64,
}

impl RunRecord {
    pub const CSV_HEADER: &'static str =
        "dataset,method,split_index,accuracy,wall_time_micros,seed_used,split_fingerprint";

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{:016x}",
            self.dataset,
            self.method,
            self.split_index,
            self.accuracy,
            self.wall_time_micros,
            self.seed_used,
            self.split_fingerprint
        )
    }
}

#[derive(Debug, Clone, Copy)]
enum MethodKind {
    FalseLabel(usize),
    Baseline(Baseline),
}

struct Job<'a> {
    dataset: &'a Dataset,
    split_index: usize,
    split_seed: u64,
    fingerprint: u64,
    train: &'a Dataset,
    test: &'a Dataset,
    method: MethodKind,
}

struct JobOutput {
    record: RunRecord,
    trace: Option<Vec<AnnealTraceRow>>,
    model: Option<EnsembleModel>,
}

struct OuterSplit {
    seed: u64,
    fingerprint: u64,
    train: Dataset,
    test: Dataset,
}

fn outer_split(cfg: &ExperimentConfig, d: &Dataset, rep: usize) -> Result<OuterSplit> {
    for attempt in 0..=cfg.max_resplits {
        let seed = derive_seed(cfg.seed, &format!("outer:{}:{attempt}", d.name()), rep as u64);
        let split = d.random_split(seed)?;
        if split.part0.has_both_classes() {
            return Ok(OuterSplit {
                seed,
                fingerprint: split.fingerprint(),
                train: split.part0,
                test: split.part1,
            });
        }
    }
    Err(Error::ClassCoverage(cfg.max_resplits + 1))
}

fn accuracy(predicted: &[Label], truth: &[Label]) -> f64 {
    let hits = predicted.iter().zip(truth).filter(|(p, t)| p == t).count();
    hits as f64 / truth.len() as f64
}

fn keep_trace_rows(rows: Vec<AnnealTraceRow>, stride: u64) -> Vec<AnnealTraceRow> {
    let last = rows.len().saturating_sub(1);
    rows.into_iter()
        .enumerate()
        .filter(|(i, r)| r.iteration % stride == 0 || *i == last)
        .map(|(_, r)| r)
        .collect()
}

fn run_job(cfg: &ExperimentConfig, job: &Job<'_>) -> Result<JobOutput> {
    let start = Instant::now();
    let truth = job.test.labels();
    let (method, seed, predicted, trace, model) = match job.method {
        MethodKind::FalseLabel(size) => {
            let method = format!("D{size}");
            let seed = derive_seed(job.split_seed, &method, 0);
            let mut rows = Vec::new();
            let mut hook = |r: &AnnealTraceRow| rows.push(r.clone());
            let hook_ref: Option<crate::anneal::TraceHook<'_>> =
                if cfg.trace_stride > 0 { Some(&mut hook) } else { None };
            let build = build_false_label_ensemble_traced(job.train, size, &cfg.false_label_config(), seed, hook_ref)?;
            let predicted = build.ensemble.predict_all(job.test)?;
            let trace = (cfg.trace_stride > 0).then(|| keep_trace_rows(rows, cfg.trace_stride));
            (method, seed, predicted, trace, Some(EnsembleModel::FalseLabel(build.ensemble)))
        }
        MethodKind::Baseline(b) => {
            let seed = derive_seed(job.split_seed, b.method_name(), 0);
            let balanced = job.train.bootstrap_balance(derive_seed(job.split_seed, "balance", 0))?;
            let (predicted, model) = match b {
                Baseline::NaiveBayes => (NaiveBayesModel::train(&balanced)?.predict_all(job.test)?, None),
                Baseline::Bagging => {
                    let e = build_bagging(&balanced, cfg.bagging_size, seed)?;
                    (e.predict_all(job.test)?, Some(EnsembleModel::Baseline(e)))
                }
                Baseline::AdaBoost => {
                    let e = build_adaboost(&balanced, cfg.adaboost_rounds, seed)?;
                    (e.predict_all(job.test)?, Some(EnsembleModel::Baseline(e)))
                }
            };
            (b.method_name().to_string(), seed, predicted, None, model)
        }
    };
    let record = RunRecord {
        dataset: job.dataset.name().to_string(),
        method,
        split_index: job.split_index,
        accuracy: accuracy(&predicted, truth),
        wall_time_micros: start.elapsed().as_micros() as u64,
        seed_used: seed,
        split_fingerprint: job.fingerprint,
    };
    log::debug!(
        "{} {} split {}: accuracy {:.4}",
        record.dataset,
        record.method,
        record.split_index,
        record.accuracy
    );
    Ok(JobOutput { record, trace, model })
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReportStatus<T> {
    Ok(T),
    Skipped(String),
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub methods: Vec<String>,
    pub datasets: Vec<String>,
    pub records: Vec<RunRecord>,
    pub scores: Vec<MethodScores>,
    pub diff: ReportStatus<crate::stats::DiffTable>,
    pub friedman: ReportStatus<crate::stats::FriedmanResult>,
}

impl ExperimentReport {
    pub fn scores_for(&self, method: &str) -> Option<&MethodScores> {
        self.scores.iter().find(|s| s.method == method)
    }

    /// Datasets as rows, methods as columns; `mean±std` cells followed by
    /// raw mean and std columns.
    pub fn summary_csv(&self) -> Result<String> {
        let mut out = String::from("dataset");
        for m in &self.methods {
            let _ = write!(out, ",{m}");
        }
        for m in &self.methods {
            let _ = write!(out, ",{m}_mean,{m}_std");
        }
        out.push('\n');
        for d in &self.datasets {
            let mut cells = Vec::new();
            let mut raw = Vec::new();
            for s in &self.scores {
                let (mean, std) = summarize(&s.per_dataset[d])?;
                cells.push(format!("{mean:.2}±{std:.2}"));
                raw.push(format!("{mean:.6},{std:.6}"));
            }
            let _ = writeln!(out, "{d},{},{}", cells.join(","), raw.join(","));
        }
        Ok(out)
    }

    pub fn runs_csv(&self) -> String {
        let mut out = format!("{}\n", RunRecord::CSV_HEADER);
        for r in &self.records {
            out.push_str(&r.to_csv_row());
            out.push('\n');
        }
        out
    }

    pub fn diff_csv(&self) -> String {
        match &self.diff {
            ReportStatus::Ok(t) => t.to_csv(),
            ReportStatus::Skipped(why) => format!("status,skipped\nreason,{why}\n"),
        }
    }

    pub fn friedman_csv(&self) -> String {
        match &self.friedman {
            ReportStatus::Ok(f) => {
                let body = f.to_csv();
                let (header, rest) = body.split_once('\n').unwrap_or((&body, ""));
                format!("{header}\nstatus,ok\n{rest}")
            }
            ReportStatus::Skipped(why) => format!("key,value\nstatus,skipped\nreason,{why}\n"),
        }
    }
}

/// Everything an experiment produces, keyed by `<dataset>_<method>_<split>`.
pub struct ExperimentOutput {
    pub report: ExperimentReport,
    pub traces: Vec<(String, Vec<AnnealTraceRow>)>,
    pub models: Vec<(String, EnsembleModel)>,
}

fn load_datasets(cfg: &ExperimentConfig) -> Result<Vec<Dataset>> {
    cfg.datasets
        .iter()
        .map(|spec| {
            let d = spec.load(None)?;
            if !d.has_both_classes() {
                return Err(Error::SingleClass);
            }
            Ok(d)
        })
        .collect()
}

/// Validates the config, loads every dataset, then runs all
/// (dataset, split, method) jobs in parallel. Results are ordered by
/// dataset, split and method regardless of completion order.
pub fn execute(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let datasets = load_datasets(cfg)?;

    let mut splits = Vec::new();
    for d in &datasets {
        for rep in 0..cfg.repetitions {
            splits.push((d, rep, outer_split(cfg, d, rep)?));
        }
    }
    let mut sizes = cfg.ensemble_sizes.clone();
    sizes.sort_unstable();
    let kinds: Vec<MethodKind> = sizes
        .iter()
        .map(|&l| MethodKind::FalseLabel(l))
        .chain(cfg.baselines.iter().map(|&b| MethodKind::Baseline(b)))
        .collect();
    let jobs: Vec<Job<'_>> = splits
        .iter()
        .flat_map(|(d, rep, s)| {
            kinds.iter().map(move |&method| Job {
                dataset: d,
                split_index: *rep,
                split_seed: s.seed,
                fingerprint: s.fingerprint,
                train: &s.train,
                test: &s.test,
                method,
            })
        })
        .collect();
    log::info!("running {} jobs", jobs.len());

    let outputs: Vec<JobOutput> = jobs.par_iter().map(|j| run_job(cfg, j)).collect::<Result<_>>()?;

    let methods = cfg.methods();
    let mut scores: Vec<MethodScores> = methods.iter().map(MethodScores::new).collect();
    let mut traces = Vec::new();
    let mut models = Vec::new();
    let mut records = Vec::with_capacity(outputs.len());
    for out in outputs {
        let r = out.record;
        let stem = format!("{}_{}_{}", r.dataset, r.method, r.split_index);
        let idx = methods.iter().position(|m| *m == r.method).expect("method listed");
        scores[idx].push(&r.dataset, r.accuracy);
        if let Some(t) = out.trace {
            traces.push((stem.clone(), t));
        }
        if let Some(m) = out.model {
            models.push((stem, m));
        }
        records.push(r);
    }

    let n_sizes = sizes.len();
    let diff = if n_sizes == 0 || cfg.baselines.is_empty() {
        ReportStatus::Skipped("needs at least one ensemble size and one baseline".into())
    } else {
        ReportStatus::Ok(diff_vs_best(&scores[..n_sizes], &scores[n_sizes..])?)
    };
    let friedman = match friedman_test(&scores, cfg.friedman_blocks) {
        Ok(f) => ReportStatus::Ok(f),
        Err(e @ (Error::TooFewMethods(_) | Error::KeyMismatch(_))) => ReportStatus::Skipped(e.to_string()),
        Err(e) => return Err(e),
    };

    let report = ExperimentReport {
        methods,
        datasets: datasets.iter().map(|d| d.name().to_string()).collect(),
        records,
        scores,
        diff,
        friedman,
    };
    Ok(ExperimentOutput {
        report,
        traces,
        models,
    })
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Runs the experiment and writes `summary.csv`, `diff_vs_best.csv`,
/// `friedman.csv`, `runs.csv`, `traces/*.csv` and `ensembles/*.json` under
/// the output directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let ExperimentOutput {
        report,
        traces,
        models,
    } = execute(cfg)?;
    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_file(&dir.join("summary.csv"), &report.summary_csv()?)?;
    write_file(&dir.join("diff_vs_best.csv"), &report.diff_csv())?;
    write_file(&dir.join("friedman.csv"), &report.friedman_csv())?;
    write_file(&dir.join("runs.csv"), &report.runs_csv())?;
    if !traces.is_empty() {
        let tdir = dir.join("traces");
        std::fs::create_dir_all(&tdir).map_err(|e| Error::io(&tdir, e))?;
        for (stem, rows) in &traces {
            write_file(&tdir.join(format!("{stem}.csv")), &trace_to_csv(rows))?;
        }
    }
    if cfg.save_ensembles && !models.is_empty() {
        let edir = dir.join("ensembles");
        std::fs::create_dir_all(&edir).map_err(|e| Error::io(&edir, e))?;
        for (stem, m) in &models {
            m.save(edir.join(format!("{stem}.json")))?;
        }
    }
    Ok(report)
}

/// Per-method score table keyed by dataset, in method order.
pub fn scores_by_method(records: &[RunRecord]) -> BTreeMap<String, MethodScores> {
    let mut out: BTreeMap<String, MethodScores> = BTreeMap::new();
    for r in records {
        out.entry(r.method.clone())
            .or_insert_with(|| MethodScores::new(r.method.clone()))
            .push(&r.dataset, r.accuracy);
    }
    out
}
