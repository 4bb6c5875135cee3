use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::synth::{gen_synthetic, SyntheticSpec};
use crate::error::{Error, Result};
use crate::ingest::{load_csv, subsample, Dataset, Schema};
use crate::models::ModelSpec;
use crate::preprocess::SplitConfig;
use crate::resample::{SamplerConfig, SamplerMethod};
use crate::scalar::Scalar;

/// One input dataset: a CSV file or a synthetic spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    /// Preset name (`ecd`, `scd`, `tcd`) or path to a schema TOML. Without
    /// one every column except `label` is numeric.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<String>,
    #[serde(default = "default_label")]
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticSpec>,
    /// Draw this many rows, keeping the class mix.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subsample: Option<usize>,
}

fn default_label() -> String {
    "Class".into()
}

impl DatasetConfig {
    pub fn synthetic(name: impl Into<String>, spec: SyntheticSpec) -> Self {
        Self {
            name: name.into(),
            path: None,
            schema: None,
            label: default_label(),
            synthetic: Some(spec),
            subsample: None,
        }
    }

    pub fn file(name: impl Into<String>, path: impl Into<PathBuf>) -> Self {
        Self {
            name: name.into(),
            path: Some(path.into()),
            schema: None,
            label: default_label(),
            synthetic: None,
            subsample: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains(['/', '\\', ',']) {
            return Err(Error::Config(format!("dataset name '{}' is not usable", self.name)));
        }
        match (&self.path, &self.synthetic) {
            (Some(p), None) => {
                if !p.is_file() {
                    return Err(Error::Config(format!("dataset file {} not found", p.display())));
                }
                if let Some(s) = &self.schema {
                    if Schema::preset(s).is_none() && !Path::new(s).is_file() {
                        return Err(Error::Config(format!("schema '{s}' is neither a preset nor a file")));
                    }
                }
                Ok(())
            }
            (None, Some(spec)) => spec.validate(),
            _ => Err(Error::Config(format!(
                "dataset '{}' needs exactly one of path or synthetic",
                self.name
            ))),
        }
    }

    pub fn resolve_schema(&self) -> Result<Option<Schema>> {
        let Some(path) = &self.path else {
            return Ok(None);
        };
        Ok(Some(match &self.schema {
            Some(s) => match Schema::preset(s) {
                Some(schema) => schema,
                None => Schema::load(Path::new(s))?,
            },
            None => Schema::from_header(path, &self.label)?,
        }))
    }

    pub fn load<S: Scalar>(&self, seed: u64) -> Result<Dataset<S>> {
        let ds = match (&self.path, &self.synthetic) {
            (Some(p), _) => load_csv(p, &self.resolve_schema()?.unwrap())?,
            (None, Some(spec)) => gen_synthetic(spec)?,
            _ => return Err(Error::Config("dataset has no source".into())),
        };
        match self.subsample {
            Some(n) if n < ds.n_rows() => subsample(&ds, n, true, seed),
            _ => Ok(ds),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    /// Standardize features with statistics of the training partition.
    pub scale: bool,
    pub test_frac: f64,
    pub val_frac: f64,
    pub stratified: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        let s = SplitConfig::default();
        Self {
            scale: true,
            test_frac: s.test_frac,
            val_frac: s.val_frac,
            stratified: s.stratified,
        }
    }
}

impl PreprocessConfig {
    pub fn split_config(&self) -> SplitConfig {
        SplitConfig {
            test_frac: self.test_frac,
            val_frac: self.val_frac,
            stratified: self.stratified,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Partition {
    Validation,
    Test,
}

impl Partition {
    pub fn name(self) -> &'static str {
        match self {
            Partition::Validation => "validation",
            Partition::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Global seed; every stage seed is derived from it.
    pub seed: u64,
    /// Cells trained concurrently; 0 uses every core.
    pub jobs: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    pub threshold: f64,
    /// Partitions each cell is scored on.
    pub partitions: Vec<Partition>,
    /// Partition drawn in the chart.
    pub chart_partition: Partition,
    /// Write per-cell wall-clock seconds to `cells.csv`.
    pub timings: bool,
    pub save_models: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            jobs: 0,
            output: None,
            threshold: 0.5,
            partitions: vec![Partition::Validation, Partition::Test],
            chart_partition: Partition::Test,
            timings: false,
            save_models: true,
        }
    }
}

pub const DEFAULT_RATIOS: [f64; 7] = [1.0, 2.0, 5.0, 10.0, 25.0, 50.0, 100.0];

/// A full experiment description, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub preprocess: PreprocessConfig,
    /// Majority:minority ratios for the imbalance sweep.
    #[serde(default = "default_ratios")]
    pub ratios: Vec<f64>,
    #[serde(rename = "dataset", default)]
    pub datasets: Vec<DatasetConfig>,
    #[serde(rename = "sampler", default)]
    pub samplers: Vec<SamplerConfig>,
    #[serde(rename = "model", default)]
    pub models: Vec<ModelSpec>,
}

fn default_name() -> String {
    "experiment".into()
}

fn default_ratios() -> Vec<f64> {
    DEFAULT_RATIOS.to_vec()
}

impl ExperimentPlan {
    pub fn new(datasets: Vec<DatasetConfig>, models: Vec<ModelSpec>) -> Self {
        Self {
            name: default_name(),
            run: RunConfig::default(),
            preprocess: PreprocessConfig::default(),
            ratios: default_ratios(),
            datasets,
            samplers: Vec::new(),
            models,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Samplers for `run`; an empty list means no resampling.
    pub fn run_samplers(&self) -> Vec<SamplerConfig> {
        if self.samplers.is_empty() {
            vec![SamplerConfig::none()]
        } else {
            self.samplers.clone()
        }
    }

    /// Samplers for the sampling comparison; defaults to none, RUS, the
    /// three NearMiss versions and SMOTE, all at full balance.
    pub fn comparison_samplers(&self) -> Vec<SamplerConfig> {
        if !self.samplers.is_empty() {
            return self.samplers.clone();
        }
        let mut out = vec![
            SamplerConfig::none(),
            SamplerConfig::new(SamplerMethod::Rus, 1.0),
        ];
        for v in 1..=3 {
            let mut s = SamplerConfig::new(SamplerMethod::Nearmiss, 1.0);
            s.nearmiss_version = v;
            out.push(s);
        }
        out.push(SamplerConfig::new(SamplerMethod::Smote, 1.0));
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(Error::Config(format!("experiment name '{}' is not usable", self.name)));
        }
        if self.datasets.is_empty() {
            return Err(Error::Config("plan has no [[dataset]]".into()));
        }
        if self.models.is_empty() {
            return Err(Error::Config("plan has no [[model]]".into()));
        }
        let mut names: Vec<&str> = self.datasets.iter().map(|d| d.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("dataset names must be unique".into()));
        }
        for d in &self.datasets {
            d.validate()?;
        }
        for s in &self.samplers {
            s.validate()?;
        }
        for m in &self.models {
            m.validate()?;
        }
        if self.ratios.is_empty() {
            return Err(Error::Config("ratio grid is empty".into()));
        }
        if self.ratios.iter().any(|r| !(r.is_finite() && *r >= 1.0)) {
            return Err(Error::Config("sweep ratios must be ≥ 1".into()));
        }
        if self.ratios.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("sweep ratios must be strictly ascending".into()));
        }
        if self.run.partitions.is_empty() {
            return Err(Error::Config("run.partitions is empty".into()));
        }
        if !self.run.threshold.is_finite() {
            return Err(Error::Config("threshold must be finite".into()));
        }
        self.preprocess
            .split_config()
            .validate()
            .map_err(|e| Error::Config(e.to_string()))
    }

    /// SHA-256 over the plan's canonical JSON, excluding the output
    /// directory and job count, which do not affect results.
    pub fn hash(&self) -> String {
        let mut canon = self.clone();
        canon.run.output = None;
        canon.run.jobs = 0;
        let json = serde_json::to_string(&canon).expect("plan serializes");
        Sha256::digest(json.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}
