//! Experiment orchestration: configuration, the split / select / retrain /
//! evaluate protocol over datasets and seeds, report files and summaries.
//!
//! Each `(dataset, seed)` cell is processed as a unit: the data is split,
//! subset-search methods run first so their cardinalities are known, then the
//! rankers are cut at every configured `k`. Every selected feature set is
//! scored by a model retrained on the training and validation rows and
//! evaluated on those rows and on the held-out test rows. Selection only ever
//! receives copies of the training and validation rows, and the copies are
//! made through a [`RowAudit`] so that the isolation can be checked.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use log::{error, info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{
    overfit_ratio, pairwise_tests, ranking_from, OverfitKind, PairedSample, PairwiseResult, RankingRow,
    DEFAULT_ALPHA,
};
use crate::baselines::{correlation_rank, infogain_rank, pfi_on, RankOptions, DEFAULT_BINS};
use crate::chromosome::Chromosome;
use crate::dataset::{self, generate_synthetic, Dataset, DatasetError, SyntheticSpec, Target, TargetColumn, Task};
use crate::learner::{self, LearnerSpec, Predictor};
use crate::metrics::{self, Metric};
use crate::moea::{self, MoeaConfig, TraceRecord, Variant};
use crate::permutation::FeatureScores;
use crate::rng::{derive_seed, TAG_LEARNER, TAG_PFI};

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("invalid experiment configuration: {0}")]
    Config(String),
    #[error("cannot parse configuration: {0}")]
    Toml(#[from] toml::de::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("no successful report rows to summarize")]
    NothingToSummarize,
    #[error("cannot build thread pool: {0}")]
    ThreadPool(String),
}

// ---------------------------------------------------------------------------
// Configuration

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSource {
    /// Used in report rows and file names. Defaults to the file stem, or
    /// `synthetic<i>`.
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub synthetic: Option<SyntheticSpec>,
    pub task: Task,
    /// Target column for CSV files: `last`, a 0-based index or a header name.
    #[serde(default)]
    pub target: Option<String>,
}

/// Cardinality at which a ranking is cut.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "KRaw", into = "KRaw")]
pub enum KValue {
    Fixed(usize),
    /// Cardinality chosen by the V1 subset search of the same seed.
    N1,
    /// Cardinality chosen by the V2 subset search of the same seed.
    N2,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum KRaw {
    Count(usize),
    Named(String),
}

impl TryFrom<KRaw> for KValue {
    type Error = String;

    fn try_from(raw: KRaw) -> Result<Self, Self::Error> {
        match raw {
            KRaw::Count(0) => Err("k must be at least 1".into()),
            KRaw::Count(k) => Ok(KValue::Fixed(k)),
            KRaw::Named(s) => s.parse(),
        }
    }
}

impl From<KValue> for KRaw {
    fn from(k: KValue) -> Self {
        match k {
            KValue::Fixed(k) => KRaw::Count(k),
            other => KRaw::Named(other.to_string()),
        }
    }
}

impl FromStr for KValue {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "N1" | "n1" => Ok(KValue::N1),
            "N2" | "n2" => Ok(KValue::N2),
            other => match other.parse::<usize>() {
                Ok(0) | Err(_) => Err(format!("k must be a positive count, N1 or N2; got {other:?}")),
                Ok(k) => Ok(KValue::Fixed(k)),
            },
        }
    }
}

impl fmt::Display for KValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KValue::Fixed(k) => write!(f, "{k}"),
            KValue::N1 => f.write_str("N1"),
            KValue::N2 => f.write_str("N2"),
        }
    }
}

fn default_repeats() -> usize {
    5
}

fn default_bins() -> usize {
    DEFAULT_BINS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MethodSpec {
    /// Subset search, training on the training rows and scoring on the
    /// validation rows. `seed` and `variant` in the settings are ignored.
    PsefsV1(MoeaConfig),
    /// Subset search on training plus validation rows.
    PsefsV2(MoeaConfig),
    PfiV1 {
        #[serde(default = "default_repeats")]
        repeats: usize,
    },
    PfiV2 {
        #[serde(default = "default_repeats")]
        repeats: usize,
    },
    Corr,
    Infogain {
        #[serde(default = "default_bins")]
        bins: usize,
    },
    All,
}

impl MethodSpec {
    pub fn name(&self) -> &'static str {
        match self {
            MethodSpec::PsefsV1(_) => "psefs-v1",
            MethodSpec::PsefsV2(_) => "psefs-v2",
            MethodSpec::PfiV1 { .. } => "pfi-v1",
            MethodSpec::PfiV2 { .. } => "pfi-v2",
            MethodSpec::Corr => "corr",
            MethodSpec::Infogain { .. } => "infogain",
            MethodSpec::All => "all",
        }
    }

    fn is_search(&self) -> bool {
        matches!(self, MethodSpec::PsefsV1(_) | MethodSpec::PsefsV2(_))
    }

    fn is_ranker(&self) -> bool {
        !self.is_search() && *self != MethodSpec::All
    }
}

fn default_k_values() -> Vec<KValue> {
    vec![KValue::Fixed(10), KValue::Fixed(100), KValue::N1, KValue::N2]
}

fn default_seeds() -> Vec<u64> {
    (0..10).collect()
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub datasets: Vec<DatasetSource>,
    pub methods: Vec<MethodSpec>,
    #[serde(default = "default_k_values")]
    pub k_values: Vec<KValue>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub learner: LearnerSpec,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Worker threads; `None` uses the global pool.
    #[serde(default)]
    pub threads: Option<usize>,
    /// Stratify splits of classification datasets.
    #[serde(default = "default_true")]
    pub stratified: bool,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, RunnerError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a TOML file. Relative dataset paths and the output directory are
    /// taken relative to the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, RunnerError> {
        let path = path.as_ref();
        let mut cfg = Self::from_toml_str(&fs::read_to_string(path)?)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for d in &mut cfg.datasets {
            if let Some(p) = &d.path {
                if p.is_relative() {
                    d.path = Some(base.join(p));
                }
            }
        }
        if cfg.output_dir.is_relative() {
            cfg.output_dir = base.join(&cfg.output_dir);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), RunnerError> {
        let bad = |m: String| Err(RunnerError::Config(m));
        if self.datasets.is_empty() {
            return bad("at least one dataset is required".into());
        }
        if self.methods.is_empty() {
            return bad("at least one method is required".into());
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        if self.threads == Some(0) {
            return bad("threads must be at least 1".into());
        }
        let mut names = Vec::new();
        for (i, d) in self.datasets.iter().enumerate() {
            match (&d.path, &d.synthetic) {
                (Some(_), None) => {}
                (None, Some(spec)) => {
                    if d.task != Task::Regression {
                        return bad(format!("synthetic dataset {i} must be a regression task"));
                    }
                    spec.validate()?;
                }
                _ => return bad(format!("dataset {i} needs exactly one of `path` or `synthetic`")),
            }
            let name = self.dataset_name(i);
            if names.contains(&name) {
                return bad(format!("duplicate dataset name {name:?}"));
            }
            names.push(name);
        }
        let mut seen = Vec::new();
        for m in &self.methods {
            if seen.contains(&m.name()) {
                return bad(format!("method {} listed twice", m.name()));
            }
            seen.push(m.name());
            match m {
                MethodSpec::PsefsV1(c) | MethodSpec::PsefsV2(c) => {
                    c.validate().map_err(|e| RunnerError::Config(e.to_string()))?
                }
                MethodSpec::PfiV1 { repeats: 0 } | MethodSpec::PfiV2 { repeats: 0 } => {
                    return bad("pfi repeats must be at least 1".into())
                }
                MethodSpec::Infogain { bins } if *bins < 2 => return bad("infogain bins must be at least 2".into()),
                _ => {}
            }
        }
        Ok(())
    }

    pub fn dataset_name(&self, i: usize) -> String {
        let d = &self.datasets[i];
        if let Some(n) = &d.name {
            return n.clone();
        }
        match &d.path {
            Some(p) => p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| format!("dataset{i}")),
            None => format!("synthetic{i}"),
        }
    }

    fn search_config(&self, variant: Variant) -> Option<&MoeaConfig> {
        self.methods.iter().find_map(|m| match (m, variant) {
            (MethodSpec::PsefsV1(c), Variant::V1) | (MethodSpec::PsefsV2(c), Variant::V2) => Some(c),
            _ => None,
        })
    }
}

fn load_source(src: &DatasetSource) -> Result<Dataset<f64>, RunnerError> {
    if let Some(spec) = &src.synthetic {
        return Ok(generate_synthetic::<f64>(spec)?.data);
    }
    let path = src.path.as_ref().ok_or_else(|| RunnerError::Config("dataset without source".into()))?;
    let target: TargetColumn = match &src.target {
        Some(t) => t.parse().map_err(RunnerError::Config)?,
        None => TargetColumn::Last,
    };
    Ok(dataset::load_csv_with(path, src.task, &target)?)
}

// ---------------------------------------------------------------------------
// Row access audit

/// Counts how often each row of a dataset has been copied out for
/// selection.
pub struct RowAudit {
    reads: Vec<AtomicUsize>,
}

impl RowAudit {
    pub fn new(n_rows: usize) -> Self {
        Self { reads: (0..n_rows).map(|_| AtomicUsize::new(0)).collect() }
    }

    pub fn subset<T: crate::Scalar>(&self, d: &Dataset<T>, rows: &[usize]) -> Result<Dataset<T>, DatasetError> {
        for &r in rows {
            if let Some(c) = self.reads.get(r) {
                c.fetch_add(1, Ordering::Relaxed);
            }
        }
        d.subset(rows)
    }

    pub fn reads(&self, row: usize) -> usize {
        self.reads[row].load(Ordering::Relaxed)
    }

    /// Total reads over `rows`.
    pub fn total(&self, rows: &[usize]) -> usize {
        rows.iter().map(|&r| self.reads(r)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub dataset: String,
    pub seed: u64,
    pub selection_row_reads: usize,
    pub test_row_reads: usize,
}

// ---------------------------------------------------------------------------
// Reports

/// One evaluated feature set. Metric columns not applicable to the task are
/// empty. `runtime_seconds` is the selection wall time and is the only
/// column that varies between identical runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub dataset: String,
    pub method: String,
    /// Empty for subset methods, otherwise the requested cut.
    pub k: String,
    pub seed: u64,
    pub status: String,
    pub n_features: usize,
    pub selected_count: Option<usize>,
    /// Selected features as a hex bitmask.
    pub mask: String,
    pub train_acc: Option<f64>,
    pub train_ba: Option<f64>,
    pub train_rmse: Option<f64>,
    pub train_nrmse: Option<f64>,
    pub train_r2: Option<f64>,
    pub test_acc: Option<f64>,
    pub test_ba: Option<f64>,
    pub test_rmse: Option<f64>,
    pub test_nrmse: Option<f64>,
    pub test_r2: Option<f64>,
    pub error: String,
    pub runtime_seconds: Option<f64>,
}

pub const STATUS_OK: &str = "ok";
pub const STATUS_FAILED: &str = "failed";

impl ReportRow {
    fn blank(dataset: &str, method: &str, k: &str, seed: u64, w: usize) -> Self {
        Self {
            dataset: dataset.into(),
            method: method.into(),
            k: k.into(),
            seed,
            status: STATUS_OK.into(),
            n_features: w,
            selected_count: None,
            mask: String::new(),
            train_acc: None,
            train_ba: None,
            train_rmse: None,
            train_nrmse: None,
            train_r2: None,
            test_acc: None,
            test_ba: None,
            test_rmse: None,
            test_nrmse: None,
            test_r2: None,
            error: String::new(),
            runtime_seconds: None,
        }
    }

    fn failed(mut self, err: impl fmt::Display) -> Self {
        self.status = STATUS_FAILED.into();
        self.error = err.to_string();
        self
    }

    /// `method` or `method@k`.
    pub fn label(&self) -> String {
        if self.k.is_empty() {
            self.method.clone()
        } else {
            format!("{}@{}", self.method, self.k)
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == STATUS_OK
    }

    pub fn train(&self, m: Metric) -> Option<f64> {
        match m {
            Metric::Acc => self.train_acc,
            Metric::Ba => self.train_ba,
            Metric::Rmse => self.train_rmse,
            Metric::Nrmse => self.train_nrmse,
            Metric::R2 => self.train_r2,
        }
    }

    pub fn test(&self, m: Metric) -> Option<f64> {
        match m {
            Metric::Acc => self.test_acc,
            Metric::Ba => self.test_ba,
            Metric::Rmse => self.test_rmse,
            Metric::Nrmse => self.test_nrmse,
            Metric::R2 => self.test_r2,
        }
    }

    fn set_scores(&mut self, train: Scores, test: Scores) {
        (self.train_acc, self.train_ba, self.train_rmse, self.train_nrmse, self.train_r2) =
            (train.acc, train.ba, train.rmse, train.nrmse, train.r2);
        (self.test_acc, self.test_ba, self.test_rmse, self.test_nrmse, self.test_r2) =
            (test.acc, test.ba, test.rmse, test.nrmse, test.r2);
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Scores {
    acc: Option<f64>,
    ba: Option<f64>,
    rmse: Option<f64>,
    nrmse: Option<f64>,
    r2: Option<f64>,
}

/// nRMSE is normalized by the target range of the whole dataset, so train
/// and test values share a denominator.
fn score(truth: &Target<f64>, predicted: &Target<f64>, q: usize, full_target: &[f64]) -> Result<Scores, String> {
    let e = |err: metrics::MetricError| err.to_string();
    match (truth, predicted) {
        (Target::Classes(y), Target::Classes(p)) => Ok(Scores {
            acc: Some(metrics::accuracy(y, p).map_err(e)?),
            ba: Some(metrics::balanced_accuracy(y, p, q).map_err(e)?),
            ..Default::default()
        }),
        (Target::Values(y), Target::Values(p)) => {
            let rmse = metrics::rmse(y, p).map_err(e)?;
            Ok(Scores {
                rmse: Some(rmse),
                nrmse: Some(metrics::nrmse(rmse, full_target).map_err(e)?),
                r2: Some(metrics::r_squared(y, p).map_err(e)?),
                ..Default::default()
            })
        }
        _ => Err("prediction task does not match target".into()),
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub rows: Vec<ReportRow>,
    /// `(file stem, trace)` for every subset-search run.
    pub traces: Vec<(String, TraceRecord)>,
    pub audits: Vec<AuditRecord>,
}

// ---------------------------------------------------------------------------
// Protocol

/// Runs every `(dataset, seed)` cell. Failures are reported as rows rather
/// than aborting the run, except for configuration errors.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome, RunnerError> {
    cfg.validate()?;
    match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| RunnerError::ThreadPool(e.to_string()))?
            .install(|| run_cells(cfg)),
        None => run_cells(cfg),
    }
}

fn run_cells(cfg: &ExperimentConfig) -> Result<ExperimentOutcome, RunnerError> {
    let loaded: Vec<(String, Result<Dataset<f64>, String>)> = (0..cfg.datasets.len())
        .map(|i| {
            let name = cfg.dataset_name(i);
            let data = load_source(&cfg.datasets[i]).map_err(|e| e.to_string());
            if let Err(e) = &data {
                error!("dataset {name}: {e}");
            }
            (name, data)
        })
        .collect();
    let jobs: Vec<(usize, u64)> =
        (0..loaded.len()).flat_map(|d| cfg.seeds.iter().map(move |&s| (d, s))).collect();
    let results: Vec<CellResult> = jobs
        .par_iter()
        .map(|&(d, seed)| {
            let (name, data) = &loaded[d];
            match data {
                Ok(data) => run_cell(cfg, name, data, seed),
                Err(e) => CellResult::all_failed(cfg, name, seed, e),
            }
        })
        .collect();
    let mut outcome = ExperimentOutcome { rows: Vec::new(), traces: Vec::new(), audits: Vec::new() };
    for r in results {
        outcome.rows.extend(r.rows);
        outcome.traces.extend(r.traces);
        outcome.audits.extend(r.audit);
    }
    for a in &outcome.audits {
        if a.test_row_reads != 0 {
            error!("dataset {} seed {}: selection read {} test rows", a.dataset, a.seed, a.test_row_reads);
        }
    }
    Ok(outcome)
}

struct CellResult {
    rows: Vec<ReportRow>,
    traces: Vec<(String, TraceRecord)>,
    audit: Option<AuditRecord>,
}

impl CellResult {
    fn all_failed(cfg: &ExperimentConfig, dataset: &str, seed: u64, err: &str) -> Self {
        let mut rows = Vec::new();
        for m in &cfg.methods {
            if m.is_ranker() {
                for k in &cfg.k_values {
                    rows.push(ReportRow::blank(dataset, m.name(), &k.to_string(), seed, 0).failed(err));
                }
            } else {
                rows.push(ReportRow::blank(dataset, m.name(), "", seed, 0).failed(err));
            }
        }
        Self { rows, traces: Vec::new(), audit: None }
    }
}

/// Rows available to selection methods.
struct SelectionRows {
    train: Dataset<f64>,
    validation: Dataset<f64>,
    merged: Dataset<f64>,
}

fn run_cell(cfg: &ExperimentConfig, name: &str, data: &Dataset<f64>, seed: u64) -> CellResult {
    let w = data.n_features();
    let stratified = cfg.stratified && data.task() == Task::Classification;
    let part = match dataset::split(data, seed, stratified) {
        Ok(p) => p,
        Err(e) => return CellResult::all_failed(cfg, name, seed, &e.to_string()),
    };
    let audit = RowAudit::new(data.n_rows());
    let rows = (|| -> Result<SelectionRows, DatasetError> {
        Ok(SelectionRows {
            train: audit.subset(data, &part.train)?,
            validation: audit.subset(data, &part.validation)?,
            merged: audit.subset(data, &part.merged())?,
        })
    })();
    let sel = match rows {
        Ok(s) => s,
        Err(e) => return CellResult::all_failed(cfg, name, seed, &e.to_string()),
    };
    let selection_learner = cfg.learner.with_seed(derive_seed(seed, &[TAG_LEARNER, 0]));
    let eval_learner = cfg.learner.with_seed(derive_seed(seed, &[TAG_LEARNER, 1]));
    let evaluator = Evaluator {
        data,
        merged_rows: part.merged(),
        test_rows: part.test.clone(),
        learner: &eval_learner,
        full_target: data.target().to_reals(),
    };

    let mut out = Vec::new();
    let mut traces = Vec::new();
    let mut cardinality: HashMap<Variant, Result<usize, String>> = HashMap::new();

    for m in cfg.methods.iter().filter(|m| m.is_search()) {
        let (variant, moea_cfg) = match m {
            MethodSpec::PsefsV1(c) => (Variant::V1, c),
            MethodSpec::PsefsV2(c) => (Variant::V2, c),
            _ => unreachable!(),
        };
        let run_cfg = MoeaConfig { seed, variant, ..moea_cfg.clone() };
        let row = ReportRow::blank(name, m.name(), "", seed, w);
        let start = Instant::now();
        let searched = match variant {
            Variant::V1 => moea::evolve_on(&sel.train, &sel.validation, &selection_learner, &run_cfg),
            Variant::V2 => moea::evolve_on(&sel.merged, &sel.merged, &selection_learner, &run_cfg),
        };
        let elapsed = start.elapsed().as_secs_f64();
        match searched {
            Ok(trace) => {
                let features = trace.best.chromosome.selected();
                cardinality.insert(variant, Ok(features.len()));
                traces.push((format!("{}_{}_seed{}", file_stem(name), m.name(), seed), trace.record()));
                let mut row = evaluator.evaluate(row, &features);
                row.runtime_seconds = Some(elapsed);
                out.push(row);
            }
            Err(e) => {
                warn!("{name} {} seed {seed}: {e}", m.name());
                cardinality.insert(variant, Err(e.to_string()));
                out.push(row.failed(e));
            }
        }
    }

    for m in cfg.methods.iter().filter(|m| !m.is_search()) {
        if *m == MethodSpec::All {
            let all: Vec<usize> = (0..w).collect();
            out.push(evaluator.evaluate(ReportRow::blank(name, "all", "", seed, w), &all));
            continue;
        }
        let opts = RankOptions {
            learner: selection_learner.clone(),
            pfi_repeats: match m {
                MethodSpec::PfiV1 { repeats } | MethodSpec::PfiV2 { repeats } => *repeats,
                _ => 1,
            },
            bins: match m {
                MethodSpec::Infogain { bins } => *bins,
                _ => DEFAULT_BINS,
            },
            seed: derive_seed(seed, &[TAG_PFI]),
        };
        let start = Instant::now();
        let ranked: Result<FeatureScores<f64>, String> = match m {
            MethodSpec::Corr => correlation_rank(&sel.merged),
            MethodSpec::Infogain { bins } => infogain_rank(&sel.merged, *bins),
            MethodSpec::PfiV1 { .. } => pfi_on(&sel.train, &sel.validation, &opts),
            MethodSpec::PfiV2 { .. } => pfi_on(&sel.merged, &sel.merged, &opts),
            _ => unreachable!(),
        }
        .map_err(|e| e.to_string());
        let elapsed = start.elapsed().as_secs_f64();
        for k in &cfg.k_values {
            let row = ReportRow::blank(name, m.name(), &k.to_string(), seed, w);
            let wanted = match k {
                KValue::Fixed(k) => Ok(*k),
                KValue::N1 | KValue::N2 => {
                    let variant = if *k == KValue::N1 { Variant::V1 } else { Variant::V2 };
                    if cfg.search_config(variant).is_none() {
                        continue;
                    }
                    match &cardinality[&variant] {
                        Ok(n) => Ok(*n),
                        Err(e) => Err(format!("{k} unavailable: {e}")),
                    }
                }
            };
            let result = wanted.and_then(|want| {
                let scores = ranked.as_ref().map_err(Clone::clone)?;
                if want > w {
                    warn!("{name} seed {seed}: k = {want} exceeds {w} features, using {w}");
                }
                let k = want.min(w);
                if k == 0 {
                    return Err("empty feature subset".into());
                }
                scores.select_top_k(k).map_err(|e| e.to_string())
            });
            match result {
                Ok(features) => {
                    let mut row = evaluator.evaluate(row, &features);
                    row.runtime_seconds = Some(elapsed);
                    out.push(row);
                }
                Err(e) => out.push(row.failed(e)),
            }
        }
    }

    let audit = AuditRecord {
        dataset: name.to_string(),
        seed,
        selection_row_reads: audit.total(&part.merged()),
        test_row_reads: audit.total(&part.test),
    };
    info!("{name} seed {seed}: {} rows", out.len());
    CellResult { rows: out, traces, audit: Some(audit) }
}

struct Evaluator<'a> {
    data: &'a Dataset<f64>,
    merged_rows: Vec<usize>,
    test_rows: Vec<usize>,
    learner: &'a LearnerSpec,
    full_target: Vec<f64>,
}

impl Evaluator<'_> {
    /// Retrains on the merged rows restricted to `features` and fills in
    /// train and test scores.
    fn evaluate(&self, mut row: ReportRow, features: &[usize]) -> ReportRow {
        let w = self.data.n_features();
        row.selected_count = Some(features.len());
        row.mask = Chromosome::from_indices(w, features).to_hex();
        match self.scores(features) {
            Ok((train, test)) => {
                row.set_scores(train, test);
                row
            }
            Err(e) => row.failed(e),
        }
    }

    fn scores(&self, features: &[usize]) -> Result<(Scores, Scores), String> {
        if features.is_empty() {
            return Err("empty feature subset".into());
        }
        let reduced = self.data.select_features(features).map_err(|e| e.to_string())?;
        let q = reduced.subset(&self.merged_rows).map_err(|e| e.to_string())?;
        let t = reduced.subset(&self.test_rows).map_err(|e| e.to_string())?;
        let model = learner::fit(self.learner, &q).map_err(|e| e.to_string())?;
        let k = self.data.class_count();
        let on_q = model.predict(&q).map_err(|e| e.to_string())?;
        let on_t = model.predict(&t).map_err(|e| e.to_string())?;
        Ok((score(q.target(), &on_q, k, &self.full_target)?, score(t.target(), &on_t, k, &self.full_target)?))
    }
}

fn file_stem(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

// ---------------------------------------------------------------------------
// Files

pub const REPORTS_DIR: &str = "reports";
pub const TRACES_DIR: &str = "traces";
pub const SUMMARY_DIR: &str = "summary";

/// Writes `reports/<dataset>.csv`, `traces/*.json` and `summary/*.csv`
/// under `dir`.
pub fn write_outcome(outcome: &ExperimentOutcome, dir: &Path) -> Result<(), RunnerError> {
    let reports = dir.join(REPORTS_DIR);
    let traces = dir.join(TRACES_DIR);
    fs::create_dir_all(&reports)?;
    fs::create_dir_all(&traces)?;
    let mut by_dataset: BTreeMap<&str, Vec<&ReportRow>> = BTreeMap::new();
    for r in &outcome.rows {
        by_dataset.entry(&r.dataset).or_default().push(r);
    }
    for (name, rows) in by_dataset {
        let mut w = csv::Writer::from_path(reports.join(format!("{}.csv", file_stem(name))))?;
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
    }
    for (stem, trace) in &outcome.traces {
        fs::write(traces.join(format!("{stem}.json")), serde_json::to_string_pretty(trace)?)?;
    }
    match aggregate(&outcome.rows, DEFAULT_ALPHA) {
        Ok(summary) => summary.write(&dir.join(SUMMARY_DIR))?,
        Err(e) => warn!("no summary written: {e}"),
    }
    Ok(())
}

/// Reads every `reports/*.csv` under `dir`, in file name order.
pub fn read_reports(dir: &Path) -> Result<Vec<ReportRow>, RunnerError> {
    let reports = dir.join(REPORTS_DIR);
    let mut files: Vec<PathBuf> = fs::read_dir(&reports)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    let mut rows = Vec::new();
    for f in files {
        let mut r = csv::Reader::from_path(&f)?;
        for row in r.deserialize() {
            rows.push(row?);
        }
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Summaries

/// Metrics compared in rankings and means, by task.
pub const CLASSIFICATION_METRICS: [Metric; 2] = [Metric::Acc, Metric::Ba];
pub const REGRESSION_METRICS: [Metric; 2] = [Metric::Nrmse, Metric::R2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanRow {
    pub dataset: String,
    pub method: String,
    pub runs: usize,
    pub failures: usize,
    pub selected_count: Option<f64>,
    pub train_acc: Option<f64>,
    pub train_ba: Option<f64>,
    pub train_nrmse: Option<f64>,
    pub train_r2: Option<f64>,
    pub test_acc: Option<f64>,
    pub test_ba: Option<f64>,
    pub test_nrmse: Option<f64>,
    pub test_r2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverfitTableRow {
    pub method: String,
    pub cells: usize,
    pub acc_ratio: Option<f64>,
    pub ba_ratio: Option<f64>,
    pub nrmse_ratio: Option<f64>,
    pub r2_diff: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuntimeRow {
    pub dataset: String,
    pub method: String,
    pub runs: usize,
    pub mean_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CardinalityRow {
    pub dataset: String,
    pub n_features: usize,
    pub n1_median: Option<f64>,
    pub n2_median: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub means: Vec<MeanRow>,
    /// Per test metric; absent when fewer than two methods report it.
    pub rankings: Vec<(Metric, Vec<RankingRow>)>,
    pub pairwise: Vec<PairwiseResult>,
    pub overfitting: Vec<OverfitTableRow>,
    pub runtimes: Vec<RuntimeRow>,
    pub cardinalities: Vec<CardinalityRow>,
    pub alpha: f64,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn median(mut values: Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 { values[n / 2] } else { (values[n / 2 - 1] + values[n / 2]) / 2.0 })
}

/// Labels in order of first appearance.
fn labels(rows: &[&ReportRow]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for r in rows {
        let l = r.label();
        if !out.contains(&l) {
            out.push(l);
        }
    }
    out
}

/// Means over seeds, pairwise Wilcoxon rankings on test metrics (pairs are
/// matched `(dataset, seed)` cells), overfitting measures, runtimes and
/// median subset sizes.
pub fn aggregate(rows: &[ReportRow], alpha: f64) -> Result<Summary, RunnerError> {
    let ok: Vec<&ReportRow> = rows.iter().filter(|r| r.is_ok()).collect();
    if ok.is_empty() {
        return Err(RunnerError::NothingToSummarize);
    }
    let methods = labels(&ok);
    let mut datasets: Vec<&str> = Vec::new();
    for r in rows {
        if !datasets.contains(&r.dataset.as_str()) {
            datasets.push(&r.dataset);
        }
    }

    let mut means = Vec::new();
    for d in &datasets {
        for m in &methods {
            let all: Vec<&ReportRow> = rows.iter().filter(|r| r.dataset == *d && r.label() == *m).collect();
            if all.is_empty() {
                continue;
            }
            let good: Vec<&&ReportRow> = all.iter().filter(|r| r.is_ok()).collect();
            let avg = |f: fn(&ReportRow) -> Option<f64>| mean(good.iter().filter_map(|r| f(r)));
            means.push(MeanRow {
                dataset: d.to_string(),
                method: m.clone(),
                runs: good.len(),
                failures: all.len() - good.len(),
                selected_count: mean(good.iter().filter_map(|r| r.selected_count.map(|c| c as f64))),
                train_acc: avg(|r| r.train_acc),
                train_ba: avg(|r| r.train_ba),
                train_nrmse: avg(|r| r.train_nrmse),
                train_r2: avg(|r| r.train_r2),
                test_acc: avg(|r| r.test_acc),
                test_ba: avg(|r| r.test_ba),
                test_nrmse: avg(|r| r.test_nrmse),
                test_r2: avg(|r| r.test_r2),
            });
        }
    }

    let mut rankings = Vec::new();
    let mut pairwise = Vec::new();
    for metric in CLASSIFICATION_METRICS.into_iter().chain(REGRESSION_METRICS) {
        let reporting: Vec<&ReportRow> = ok.iter().copied().filter(|r| r.test(metric).is_some()).collect();
        let order = labels(&reporting);
        let mut values: Vec<BTreeMap<(String, u64), f64>> = vec![BTreeMap::new(); order.len()];
        for r in &ok {
            if let Some(v) = r.test(metric) {
                let i = order.iter().position(|l| *l == r.label()).unwrap();
                values[i].insert((r.dataset.clone(), r.seed), v);
            }
        }
        if order.len() < 2 {
            continue;
        }
        let mut samples = Vec::new();
        for a in 0..order.len() {
            for b in a + 1..order.len() {
                let pairs: Vec<(f64, f64)> =
                    values[a].iter().filter_map(|(key, va)| values[b].get(key).map(|vb| (*va, *vb))).collect();
                if !pairs.is_empty() {
                    samples.push(PairedSample {
                        method_a: order[a].clone(),
                        method_b: order[b].clone(),
                        metric,
                        pairs,
                    });
                }
            }
        }
        if samples.is_empty() {
            continue;
        }
        let results = pairwise_tests(&samples, alpha);
        rankings.push((metric, ranking_from(&results)));
        pairwise.extend(results);
    }

    let overfitting = methods
        .iter()
        .map(|m| {
            let mine: Vec<&&ReportRow> = ok.iter().filter(|r| r.label() == *m).collect();
            let measure = |metric: Metric, kind: OverfitKind| {
                mean(mine.iter().filter_map(|r| match (r.train(metric), r.test(metric)) {
                    (Some(tr), Some(te)) => overfit_ratio(tr, te, kind).ok(),
                    _ => None,
                }))
            };
            OverfitTableRow {
                method: m.clone(),
                cells: mine.len(),
                acc_ratio: measure(Metric::Acc, OverfitKind::AccRatio),
                ba_ratio: measure(Metric::Ba, OverfitKind::BaRatio),
                nrmse_ratio: measure(Metric::Nrmse, OverfitKind::NrmseRatio),
                r2_diff: measure(Metric::R2, OverfitKind::R2Diff),
            }
        })
        .collect();

    let mut runtimes = Vec::new();
    for d in &datasets {
        let mut seen: Vec<&str> = Vec::new();
        for r in ok.iter().filter(|r| r.dataset == *d) {
            if !seen.contains(&r.method.as_str()) {
                seen.push(&r.method);
            }
        }
        for m in seen {
            // One timing per (method, seed): ranker rows repeat it for each k.
            let mut per_seed: BTreeMap<u64, f64> = BTreeMap::new();
            for r in ok.iter().filter(|r| r.dataset == *d && r.method == m) {
                if let Some(t) = r.runtime_seconds {
                    per_seed.insert(r.seed, t);
                }
            }
            if let Some(avg) = mean(per_seed.values().copied()) {
                runtimes.push(RuntimeRow { dataset: d.to_string(), method: m.to_string(), runs: per_seed.len(), mean_seconds: avg });
            }
        }
    }

    let cardinalities = datasets
        .iter()
        .map(|d| {
            let sizes = |method: &str| {
                ok.iter()
                    .filter(|r| r.dataset == *d && r.method == method && r.k.is_empty())
                    .filter_map(|r| r.selected_count.map(|c| c as f64))
                    .collect::<Vec<f64>>()
            };
            CardinalityRow {
                dataset: d.to_string(),
                n_features: rows.iter().filter(|r| r.dataset == *d).map(|r| r.n_features).max().unwrap_or(0),
                n1_median: median(sizes("psefs-v1")),
                n2_median: median(sizes("psefs-v2")),
            }
        })
        .collect();

    Ok(Summary { means, rankings, pairwise, overfitting, runtimes, cardinalities, alpha })
}

#[derive(Serialize)]
struct PairwiseLine<'a> {
    metric: &'a str,
    method_a: &'a str,
    method_b: &'a str,
    n: usize,
    statistic: f64,
    p_value: f64,
    test: String,
    mean_diff: f64,
    winner: &'a str,
    cell: String,
}

impl Summary {
    /// Writes `means.csv`, `ranking_<metric>.csv`, `pairwise.csv`,
    /// `overfitting.csv`, `runtimes.csv` and `cardinality.csv`.
    pub fn write(&self, dir: &Path) -> Result<(), RunnerError> {
        fs::create_dir_all(dir)?;
        write_rows(&dir.join("means.csv"), &self.means)?;
        for (metric, rows) in &self.rankings {
            write_rows(&dir.join(format!("ranking_{}.csv", metric.name())), rows)?;
        }
        let lines: Vec<PairwiseLine> = self
            .pairwise
            .iter()
            .map(|p| PairwiseLine {
                metric: p.metric.name(),
                method_a: &p.method_a,
                method_b: &p.method_b,
                n: p.outcome.n,
                statistic: p.outcome.statistic,
                p_value: p.outcome.p_value,
                test: format!("{:?}", p.outcome.method),
                mean_diff: p.mean_diff,
                winner: p.winner.as_deref().unwrap_or(""),
                cell: p.cell(self.alpha),
            })
            .collect();
        write_rows(&dir.join("pairwise.csv"), &lines)?;
        write_rows(&dir.join("overfitting.csv"), &self.overfitting)?;
        write_rows(&dir.join("runtimes.csv"), &self.runtimes)?;
        write_rows(&dir.join("cardinality.csv"), &self.cardinalities)?;
        Ok(())
    }
}

fn write_rows<S: Serialize>(path: &Path, rows: &[S]) -> Result<(), RunnerError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
seeds = [1, 2]
k_values = [2, "N1"]

[learner]
n_trees = 5

[[datasets]]
name = "toy"
task = "regression"
synthetic = { n_instances = 60, n_features = 6, n_informative = 2, noise = 0.1 }

[[methods]]
kind = "psefs-v1"
population_size = 8
generations = 3

[[methods]]
kind = "corr"

[[methods]]
kind = "all"
"#;

    #[test]
    fn parses_config() {
        let cfg = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(cfg.k_values, vec![KValue::Fixed(2), KValue::N1]);
        assert_eq!(cfg.learner.n_trees, 5);
        assert!(matches!(&cfg.methods[0], MethodSpec::PsefsV1(c) if c.population_size == 8 && c.mutation_prob == 0.02));
        assert_eq!(cfg.dataset_name(0), "toy");
    }

    #[test]
    fn config_defaults() {
        let text = "[[datasets]]\npath = \"x.csv\"\ntask = \"cls\"\n[[methods]]\nkind = \"all\"\n";
        let cfg = ExperimentConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.seeds.len(), 10);
        assert_eq!(cfg.k_values, default_k_values());
        assert_eq!(cfg.dataset_name(0), "x");
    }

    #[test]
    fn config_errors() {
        let no_methods = "methods = []\n[[datasets]]\npath = \"x.csv\"\ntask = \"cls\"\n";
        assert!(ExperimentConfig::from_toml_str(no_methods).is_err());
        let both = "[[datasets]]\ntask = \"reg\"\n[[methods]]\nkind = \"all\"\n";
        assert!(ExperimentConfig::from_toml_str(both).is_err());
        let bad_k = "k_values = [0]\n[[datasets]]\npath = \"x.csv\"\ntask = \"cls\"\n[[methods]]\nkind = \"all\"\n";
        assert!(ExperimentConfig::from_toml_str(bad_k).is_err());
        let unknown = "[[datasets]]\npath = \"x.csv\"\ntask = \"cls\"\n[[methods]]\nkind = \"psefs-v1\"\npop = 3\n";
        assert!(ExperimentConfig::from_toml_str(unknown).is_err());
    }

    #[test]
    fn end_to_end_cell_rows() {
        let cfg = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        let out = run_experiment(&cfg).unwrap();
        // Per seed: psefs-v1, corr@2, corr@N1, all.
        assert_eq!(out.rows.len(), 8);
        for seed in [1, 2] {
            let of = |label: &str| out.rows.iter().find(|r| r.seed == seed && r.label() == label).unwrap();
            let n1 = of("psefs-v1").selected_count.unwrap();
            assert_eq!(of("corr@N1").selected_count, Some(n1));
            assert_eq!(of("corr@2").selected_count, Some(2));
            assert_eq!(of("all").selected_count, Some(6));
            assert!(of("all").runtime_seconds.is_none());
        }
        assert!(out.rows.iter().all(ReportRow::is_ok), "{:?}", out.rows);
        assert_eq!(out.traces.len(), 2);
        for a in &out.audits {
            assert_eq!(a.test_row_reads, 0);
            assert!(a.selection_row_reads > 0);
        }
    }

    #[test]
    fn missing_file_gives_failure_rows() {
        let text = "seeds = [0]\n[[datasets]]\npath = \"/nonexistent/x.csv\"\ntask = \"cls\"\n[[methods]]\nkind = \"all\"\n";
        let out = run_experiment(&ExperimentConfig::from_toml_str(text).unwrap()).unwrap();
        assert_eq!(out.rows.len(), 1);
        assert_eq!(out.rows[0].status, STATUS_FAILED);
    }

    #[test]
    fn n1_row_only_with_search() {
        let text = MINIMAL.replace("kind = \"psefs-v1\"\npopulation_size = 8\ngenerations = 3", "kind = \"pfi-v1\"\nrepeats = 1");
        let out = run_experiment(&ExperimentConfig::from_toml_str(&text).unwrap()).unwrap();
        assert!(out.rows.iter().all(|r| r.k != "N1"));
    }

    fn row(method: &str, seed: u64, acc: f64) -> ReportRow {
        let mut r = ReportRow::blank("d", method, "", seed, 4);
        r.selected_count = Some(2);
        r.train_acc = Some(acc + 0.1);
        r.test_acc = Some(acc);
        r.train_ba = Some(acc);
        r.test_ba = Some(acc);
        r
    }

    #[test]
    fn aggregate_single_method_has_no_ranking() {
        let rows: Vec<ReportRow> = (0..5).map(|s| row("a", s, 0.8)).collect();
        let s = aggregate(&rows, 0.05).unwrap();
        assert!(s.rankings.is_empty());
        assert_eq!(s.means.len(), 1);
        assert!((s.means[0].test_acc.unwrap() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn aggregate_identical_methods_no_decision() {
        let rows: Vec<ReportRow> = (0..6).flat_map(|s| [row("a", s, 0.7), row("b", s, 0.7)]).collect();
        let s = aggregate(&rows, 0.05).unwrap();
        assert!(s.pairwise.iter().all(|p| p.outcome.method == crate::analysis::TestMethod::NoDecision));
        assert!(s.rankings.iter().all(|(_, r)| r.iter().all(|x| x.wins == 0)));
    }

    #[test]
    fn aggregate_planted_winner() {
        let rows: Vec<ReportRow> = (0..8)
            .flat_map(|s| {
                let j = s as f64 * 0.01;
                [row("low", s, 0.5 + j), row("high", s, 0.9 + j), row("mid", s, 0.7 + j)]
            })
            .collect();
        let s = aggregate(&rows, 0.05).unwrap();
        let (_, acc) = s.rankings.iter().find(|(m, _)| *m == Metric::Acc).unwrap();
        let order: Vec<&str> = acc.iter().map(|r| r.method.as_str()).collect();
        assert_eq!(order, ["high", "mid", "low"]);
        let over = s.overfitting.iter().find(|o| o.method == "high").unwrap();
        assert!(over.acc_ratio.unwrap() > 1.0);
        assert_eq!(s.overfitting.len(), 3);
    }

    #[test]
    fn aggregate_rejects_empty() {
        assert!(matches!(aggregate(&[], 0.05), Err(RunnerError::NothingToSummarize)));
    }
}
