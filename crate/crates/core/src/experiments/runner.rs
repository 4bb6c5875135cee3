use std::fmt;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::plan::{ExperimentPlan, Partition, PreprocessConfig, RunConfig};
use crate::error::{Error, Result};
use crate::ingest::Dataset;
use crate::metrics::{evaluate, MetricReport};
use crate::models::{train_model, ModelFile, ModelKind, ModelSpec};
use crate::nn::History;
use crate::preprocess::{apply_scaler, fit_scaler_rows, split, ScalerParams, SplitIndices};
use crate::resample::{target_count, SamplerConfig, SamplerMethod};
use crate::scalar::Scalar;
use crate::seed;

/// Train/validation/test partitions of one dataset, scaled with
/// training-partition statistics.
#[derive(Debug, Clone)]
pub struct Partitions<S: Scalar> {
    pub dataset: String,
    pub train: Dataset<S>,
    pub validation: Dataset<S>,
    pub test: Dataset<S>,
    pub scaler: Option<ScalerParams<S>>,
    pub split: SplitIndices,
    /// Source row ids the scaler was fitted on.
    pub scaler_rows: Vec<usize>,
}

impl<S: Scalar> Partitions<S> {
    pub fn get(&self, p: Partition) -> &Dataset<S> {
        match p {
            Partition::Validation => &self.validation,
            Partition::Test => &self.test,
        }
    }
}

fn source_ids<S: Scalar>(ds: &Dataset<S>, rows: &[usize]) -> Vec<usize> {
    rows.iter().filter_map(|&r| ds.row_ids()[r]).collect()
}

pub fn prepare<S: Scalar>(
    ds: &Dataset<S>,
    name: &str,
    cfg: &PreprocessConfig,
    global_seed: u64,
) -> Result<Partitions<S>> {
    let split = split(ds, cfg.split_config(), seed::derive(global_seed, &format!("split/{name}")))?;
    let (scaler, scaler_rows) = if cfg.scale {
        let s = fit_scaler_rows(ds, &split.train)?;
        (Some(s), source_ids(ds, &split.train))
    } else {
        (None, Vec::new())
    };
    let part = |rows: &[usize]| -> Result<Dataset<S>> {
        let d = ds.select(rows);
        match &scaler {
            Some(s) => apply_scaler(&d, s),
            None => Ok(d),
        }
    };
    Ok(Partitions {
        dataset: name.to_string(),
        train: part(&split.train)?,
        validation: part(&split.validation)?,
        test: part(&split.test)?,
        scaler,
        split,
        scaler_rows,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CellStatus {
    Ok,
    Skipped(String),
    Failed(String),
}

impl CellStatus {
    pub fn is_skipped(&self) -> bool {
        matches!(self, CellStatus::Skipped(_))
    }
}

impl fmt::Display for CellStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CellStatus::Ok => f.write_str("ok"),
            CellStatus::Skipped(r) => write!(f, "skipped: {r}"),
            CellStatus::Failed(r) => write!(f, "failed: {r}"),
        }
    }
}

impl Serialize for CellStatus {
    fn serialize<Ser: serde::Serializer>(&self, s: Ser) -> std::result::Result<Ser::Ok, Ser::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CellStatus {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        if s == "ok" {
            Ok(CellStatus::Ok)
        } else if let Some(r) = s.strip_prefix("skipped: ") {
            Ok(CellStatus::Skipped(r.into()))
        } else if let Some(r) = s.strip_prefix("failed: ") {
            Ok(CellStatus::Failed(r.into()))
        } else {
            Err(serde::de::Error::custom(format!("bad cell status '{s}'")))
        }
    }
}

/// One grid point: dataset × sampler × model.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub dataset: usize,
    pub model: ModelSpec,
    pub sampler: SamplerConfig,
    /// Lower an unreachable under-sampling ratio to "all majority rows".
    pub cap_ratio: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub dataset: String,
    pub model: String,
    pub kind: ModelKind,
    pub sampler: String,
    pub ratio: f64,
    pub status: CellStatus,
    /// Majority:minority ratio of the training set actually used.
    pub effective_ratio: Option<f64>,
    pub train_rows: usize,
    pub validation: Option<MetricReport>,
    pub test: Option<MetricReport>,
    pub history: Option<History>,
    pub model_file: Option<String>,
    pub seconds: f64,
}

impl CellResult {
    pub fn key(&self) -> String {
        format!("{}_{}_{}_r{}", self.dataset, self.model, self.sampler, self.ratio)
    }

    pub fn metrics(&self, p: Partition) -> Option<&MetricReport> {
        match p {
            Partition::Validation => self.validation.as_ref(),
            Partition::Test => self.test.as_ref(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub experiment: String,
    pub operation: String,
    pub plan_hash: String,
    pub seed: u64,
    pub partitions: Vec<Partition>,
    pub cells: Vec<CellResult>,
}

impl RunRecord {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// A finished run: the record plus the trained models, one slot per cell.
#[derive(Debug, Clone)]
pub struct Run<S: Scalar> {
    pub record: RunRecord,
    pub models: Vec<Option<ModelFile<S>>>,
}

#[derive(Debug, Clone)]
pub struct CellOutcome<S: Scalar> {
    pub result: CellResult,
    pub model: Option<ModelFile<S>>,
    /// Source row ids handed to the sampler.
    pub sampler_rows: Vec<usize>,
}

pub fn model_seed(global: u64, dataset: &str, model: &str) -> u64 {
    seed::derive(global, &format!("model/{dataset}/{model}"))
}

pub fn sampler_seed(global: u64, dataset: &str, sampler: &SamplerConfig) -> u64 {
    seed::derive(global, &format!("sampler/{dataset}/{sampler}/{}", sampler.ratio))
}

type CellFit<S> = (Vec<(Partition, MetricReport)>, ModelFile<S>, Option<History>, Dataset<S>);

/// Resamples, trains and scores one cell. Model preconditions mark the
/// cell skipped; any other error marks it failed.
pub fn run_cell<S: Scalar>(
    parts: &Partitions<S>,
    cell: &Cell,
    run: &RunConfig,
    partitions: &[Partition],
) -> CellOutcome<S> {
    let start = Instant::now();
    let ds_name = parts.dataset.as_str();
    let mut result = CellResult {
        dataset: ds_name.to_string(),
        model: cell.model.label().to_string(),
        kind: cell.model.kind,
        sampler: cell.sampler.to_string(),
        ratio: cell.sampler.ratio,
        status: CellStatus::Ok,
        effective_ratio: None,
        train_rows: 0,
        validation: None,
        test: None,
        history: None,
        model_file: None,
        seconds: 0.0,
    };
    let mut outcome = CellOutcome {
        result: result.clone(),
        model: None,
        sampler_rows: Vec::new(),
    };
    let d = parts.train.n_features();
    if cell.model.kind.is_network() {
        if let Err(Error::Precondition(r)) = cell.model.layers(d) {
            result.status = CellStatus::Skipped(r);
            outcome.result = result;
            return outcome;
        }
    }
    outcome.sampler_rows = parts.train.row_ids().iter().flatten().copied().collect();
    let attempt = || -> Result<CellFit<S>> {
        let mut sampler = cell.sampler.clone();
        let (n_pos, n_neg) = (parts.train.n_pos(), parts.train.n_neg());
        if cell.cap_ratio
            && sampler.method == SamplerMethod::Rus
            && n_pos > 0
            && target_count(sampler.ratio, n_pos) > n_neg
        {
            log::warn!(
                "{ds_name}: ratio {} unreachable with {n_pos}/{n_neg} rows, using all majority rows",
                sampler.ratio
            );
            sampler.ratio = n_neg as f64 / n_pos as f64;
        }
        let train = sampler.apply(&parts.train, sampler_seed(run.seed, ds_name, &cell.sampler))?;
        let seed = model_seed(run.seed, ds_name, cell.model.label());
        let trained = train_model(&cell.model, &train, Some(&parts.validation), seed)?;
        let mut scores = Vec::new();
        for &p in partitions {
            let ds = parts.get(p);
            let pred = trained.model.classify(ds, run.threshold)?;
            scores.push((p, evaluate(ds.labels(), &pred)?));
        }
        let file = ModelFile::new(
            cell.model.clone(),
            parts.train.feature_names(),
            parts.scaler.clone(),
            run.threshold,
            trained.model,
        );
        Ok((scores, file, trained.history, train))
    };
    match attempt() {
        Ok((scores, file, history, train)) => {
            for (p, m) in scores {
                match p {
                    Partition::Validation => result.validation = Some(m),
                    Partition::Test => result.test = Some(m),
                }
            }
            result.train_rows = train.n_rows();
            result.effective_ratio = (train.n_pos() > 0).then(|| train.n_neg() as f64 / train.n_pos() as f64);
            result.history = history;
            outcome.model = Some(file);
        }
        Err(Error::Precondition(r)) => result.status = CellStatus::Skipped(r),
        Err(e) => {
            log::warn!("cell {} failed: {e}", result.key());
            result.status = CellStatus::Failed(e.to_string());
        }
    }
    result.seconds = start.elapsed().as_secs_f64();
    outcome.result = result;
    outcome
}

/// Loads and partitions every dataset of the plan.
pub fn prepare_all<S: Scalar>(plan: &ExperimentPlan) -> Result<Vec<Partitions<S>>> {
    plan.datasets
        .iter()
        .map(|d| {
            let ds = d.load::<S>(seed::derive(plan.run.seed, &format!("subsample/{}", d.name)))?;
            log::info!("{}: {} rows, {} features, {} positive", d.name, ds.n_rows(), ds.n_features(), ds.n_pos());
            prepare(&ds, &d.name, &plan.preprocess, plan.run.seed)
        })
        .collect()
}

fn execute<S: Scalar>(
    plan: &ExperimentPlan,
    operation: &str,
    cells: Vec<Cell>,
    partitions: Vec<Partition>,
) -> Result<Run<S>> {
    plan.validate()?;
    let parts = prepare_all::<S>(plan)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.run.jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let outcomes: Vec<CellOutcome<S>> = pool.install(|| {
        cells
            .par_iter()
            .map(|c| {
                let o = run_cell(&parts[c.dataset], c, &plan.run, &partitions);
                log::info!("{}: {}", o.result.key(), o.result.status);
                o
            })
            .collect()
    });
    let (results, models) = outcomes.into_iter().map(|o| (o.result, o.model)).unzip();
    Ok(Run {
        record: RunRecord {
            experiment: plan.name.clone(),
            operation: operation.into(),
            plan_hash: plan.hash(),
            seed: plan.run.seed,
            partitions,
            cells: results,
        },
        models,
    })
}

/// Random under-sampling of the training partition to each majority:minority
/// ratio, scored on the test partition.
pub fn sweep_imbalance<S: Scalar>(plan: &ExperimentPlan, models: &[ModelSpec], ratios: &[f64]) -> Result<Run<S>> {
    if ratios.is_empty() || ratios.iter().any(|r| !(r.is_finite() && *r >= 1.0)) {
        return Err(Error::Config("sweep ratios must be ≥ 1".into()));
    }
    if ratios.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("sweep ratios must be strictly ascending".into()));
    }
    let mut cells = Vec::new();
    for dataset in 0..plan.datasets.len() {
        for model in models {
            for &r in ratios {
                cells.push(Cell {
                    dataset,
                    model: model.clone(),
                    sampler: SamplerConfig::new(SamplerMethod::Rus, r),
                    cap_ratio: true,
                });
            }
        }
    }
    execute(plan, "sweep_imbalance", cells, vec![Partition::Test])
}

/// Every comparison sampler on each dataset and model, scored on validation
/// and test partitions.
pub fn compare_sampling<S: Scalar>(plan: &ExperimentPlan, models: &[ModelSpec]) -> Result<Run<S>> {
    let mut cells = Vec::new();
    for dataset in 0..plan.datasets.len() {
        for model in models {
            for sampler in plan.comparison_samplers() {
                cells.push(Cell {
                    dataset,
                    model: model.clone(),
                    sampler,
                    cap_ratio: false,
                });
            }
        }
    }
    execute(plan, "compare_sampling", cells, vec![Partition::Validation, Partition::Test])
}

/// Full dataset × sampler × model grid.
pub fn run_experiment<S: Scalar>(plan: &ExperimentPlan) -> Result<Run<S>> {
    let mut cells = Vec::new();
    for dataset in 0..plan.datasets.len() {
        for sampler in plan.run_samplers() {
            for model in &plan.models {
                cells.push(Cell {
                    dataset,
                    model: model.clone(),
                    sampler: sampler.clone(),
                    cap_ratio: false,
                });
            }
        }
    }
    execute(plan, "run", cells, plan.run.partitions.clone())
}
