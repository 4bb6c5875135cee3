//! The three network architectures, logistic regression and tree baselines
//! behind one train/predict interface.

pub mod tree;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Dataset;
use crate::nn::{fit, Activation, History, LayerSpec, Network, TrainConfig};
use crate::preprocess::ScalerParams;
use crate::scalar::Scalar;

pub use tree::{train_dtree, train_forest, Forest, ForestParams, TreeNode, TreeParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Cnn2d,
    Cnn1d,
    Lstm,
    #[default]
    Logreg,
    Dtree,
    Forest,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::Cnn2d,
        ModelKind::Cnn1d,
        ModelKind::Lstm,
        ModelKind::Logreg,
        ModelKind::Dtree,
        ModelKind::Forest,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Cnn2d => "cnn2d",
            ModelKind::Cnn1d => "cnn1d",
            ModelKind::Lstm => "lstm",
            ModelKind::Logreg => "logreg",
            ModelKind::Dtree => "dtree",
            ModelKind::Forest => "forest",
        }
    }

    pub fn is_network(self) -> bool {
        !matches!(self, ModelKind::Dtree | ModelKind::Forest)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown model kind '{s}'")))
    }
}

/// Model choice plus hyperparameters. Fields that do not apply to `kind`
/// are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: ModelKind,
    /// Label in reports; defaults to the kind name.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// cnn2d image grid `[rows, cols]`; must cover every feature.
    pub grid: [usize; 2],
    pub hidden: usize,
    pub inner: Activation,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub n_trees: usize,
    pub epochs: usize,
    pub batch: usize,
    pub patience: usize,
    /// Defaults to 0.01 for logreg and 0.001 for the other networks.
    pub lr: Option<f64>,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            kind: ModelKind::Logreg,
            name: None,
            grid: [5, 6],
            hidden: 50,
            inner: Activation::Relu,
            max_depth: 12,
            min_leaf: 1,
            n_trees: 50,
            epochs: 100,
            batch: 256,
            patience: 5,
            lr: None,
        }
    }
}

impl ModelSpec {
    pub fn new(kind: ModelKind) -> Self {
        Self {
            kind,
            ..Self::default()
        }
    }

    pub fn label(&self) -> &str {
        self.name.as_deref().unwrap_or(self.kind.name())
    }

    pub fn lr(&self) -> f64 {
        self.lr.unwrap_or(if self.kind == ModelKind::Logreg { 1e-2 } else { 1e-3 })
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs_max: self.epochs,
            batch: self.batch,
            patience: self.patience,
            lr: self.lr(),
            seed,
        }
    }

    /// Layer stack for a network kind over `n_features` inputs.
    pub fn layers(&self, n_features: usize) -> Result<Vec<LayerSpec>> {
        match self.kind {
            ModelKind::Cnn2d => cnn2d_layers(n_features, self.grid),
            ModelKind::Cnn1d => cnn1d_layers(n_features),
            ModelKind::Lstm => lstm_layers(n_features, self.hidden, self.inner),
            ModelKind::Logreg => Ok(vec![LayerSpec::dense(1, Some(Activation::Sigmoid))]),
            k => Err(Error::InvalidArgument(format!("{k} is not a network"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("hidden", self.hidden),
            ("max_depth", self.max_depth),
            ("min_leaf", self.min_leaf),
            ("n_trees", self.n_trees),
            ("batch", self.batch),
            ("grid rows", self.grid[0]),
            ("grid cols", self.grid[1]),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("model {name} must be positive")));
        }
        if !(self.lr() > 0.0 && self.lr().is_finite()) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if !matches!(self.inner, Activation::Relu | Activation::Tanh) {
            return Err(Error::Config("lstm inner activation must be relu or tanh".into()));
        }
        Ok(())
    }
}

fn check_features(n_features: usize) -> Result<()> {
    if n_features == 0 {
        return Err(Error::Precondition("at least one feature is required".into()));
    }
    Ok(())
}

/// Row-major image of the features, two 3×3 relu convolutions, one
/// sigmoid unit.
pub fn cnn2d_layers(n_features: usize, grid: [usize; 2]) -> Result<Vec<LayerSpec>> {
    let [h, w] = grid;
    if h * w != n_features {
        return Err(Error::Precondition(format!("not reshapeable to {h}×{w}")));
    }
    Ok(vec![
        LayerSpec::Reshape { shape: vec![h, w, 1] },
        LayerSpec::Conv2d { channels: 64, kernel: 3, activation: Some(Activation::Relu) },
        LayerSpec::Conv2d { channels: 32, kernel: 3, activation: Some(Activation::Relu) },
        LayerSpec::Flatten,
        LayerSpec::dense(1, Some(Activation::Sigmoid)),
    ])
}

/// Each row as a length-1 sequence whose channels are the features.
pub fn cnn1d_layers(n_features: usize) -> Result<Vec<LayerSpec>> {
    check_features(n_features)?;
    Ok(vec![
        LayerSpec::Reshape { shape: vec![1, n_features] },
        LayerSpec::Conv1d { channels: 64, kernel: 1, activation: Some(Activation::Relu) },
        LayerSpec::Conv1d { channels: 64, kernel: 1, activation: Some(Activation::Relu) },
        LayerSpec::Dropout { rate: 0.5 },
        LayerSpec::Maxpool1d { pool: 1 },
        LayerSpec::Flatten,
        LayerSpec::dense(100, Some(Activation::Relu)),
        LayerSpec::dense(1, Some(Activation::Sigmoid)),
    ])
}

pub fn lstm_layers(n_features: usize, hidden: usize, inner: Activation) -> Result<Vec<LayerSpec>> {
    check_features(n_features)?;
    Ok(vec![
        LayerSpec::Reshape { shape: vec![1, n_features] },
        LayerSpec::Lstm { hidden, inner },
        LayerSpec::dense(1, Some(Activation::Sigmoid)),
    ])
}

pub fn build_cnn2d<S: Scalar>(n_features: usize, seed: u64) -> Result<Network<S>> {
    Network::build(&[n_features], &cnn2d_layers(n_features, [5, 6])?, seed)
}

pub fn build_cnn1d<S: Scalar>(n_features: usize, seed: u64) -> Result<Network<S>> {
    Network::build(&[n_features], &cnn1d_layers(n_features)?, seed)
}

pub fn build_lstm<S: Scalar>(n_features: usize, seed: u64) -> Result<Network<S>> {
    Network::build(&[n_features], &lstm_layers(n_features, 50, Activation::Relu)?, seed)
}

pub fn build_logreg<S: Scalar>(n_features: usize, seed: u64) -> Result<Network<S>> {
    check_features(n_features)?;
    Network::build(&[n_features], &ModelSpec::default().layers(n_features)?, seed)
}

/// Logistic regression as a single sigmoid unit trained on BCE.
pub fn train_logreg<S: Scalar>(
    train: &Dataset<S>,
    lr: f64,
    epochs: usize,
    seed: u64,
) -> Result<Network<S>> {
    let mut net = build_logreg(train.n_features(), seed)?;
    let cfg = TrainConfig {
        epochs_max: epochs,
        lr,
        seed,
        ..TrainConfig::default()
    };
    fit(&mut net, train, None, &cfg)?;
    Ok(net)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", bound = "")]
pub enum ModelBody<S: Scalar> {
    Network(Network<S>),
    Tree(TreeNode<S>),
    Forest(Forest<S>),
}

/// A trained model of any kind. Prediction is a pure function of the model
/// and the row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Model<S: Scalar> {
    pub kind: ModelKind,
    pub n_features: usize,
    pub body: ModelBody<S>,
}

impl<S: Scalar> Model<S> {
    pub fn predict_row(&self, row: &[S]) -> Result<f64> {
        if row.len() != self.n_features {
            return Err(Error::Shape(format!(
                "row has {} features, model expects {}",
                row.len(),
                self.n_features
            )));
        }
        Ok(match &self.body {
            ModelBody::Network(n) => n.predict_proba(row)?.as_f64(),
            ModelBody::Tree(t) => t.predict(row),
            ModelBody::Forest(f) => f.predict(row),
        })
    }

    pub fn predict(&self, ds: &Dataset<S>) -> Result<Vec<f64>> {
        if ds.n_features() != self.n_features {
            return Err(Error::Shape(format!(
                "dataset has {} features, model expects {}",
                ds.n_features(),
                self.n_features
            )));
        }
        (0..ds.n_rows())
            .into_par_iter()
            .map(|i| self.predict_row(ds.row(i)))
            .collect()
    }

    /// Labels are 1 iff `p >= threshold`, with the threshold clamped to
    /// `[0, 1]`.
    pub fn classify(&self, ds: &Dataset<S>, threshold: f64) -> Result<Vec<u8>> {
        Ok(classify_probs(&self.predict(ds)?, threshold))
    }

    pub fn network(&self) -> Option<&Network<S>> {
        match &self.body {
            ModelBody::Network(n) => Some(n),
            _ => None,
        }
    }
}

pub fn classify_probs(probs: &[f64], threshold: f64) -> Vec<u8> {
    let t = if threshold.is_nan() { 0.5 } else { threshold.clamp(0.0, 1.0) };
    probs.iter().map(|&p| u8::from(p >= t)).collect()
}

#[derive(Debug, Clone)]
pub struct Trained<S: Scalar> {
    pub model: Model<S>,
    pub history: Option<History>,
}

/// Trains `spec` on `train`. Networks use `val` for early stopping when it
/// is given.
pub fn train_model<S: Scalar>(
    spec: &ModelSpec,
    train: &Dataset<S>,
    val: Option<&Dataset<S>>,
    seed: u64,
) -> Result<Trained<S>> {
    spec.validate()?;
    let d = train.n_features();
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let (body, history) = match spec.kind {
        ModelKind::Dtree => {
            let params = TreeParams {
                max_depth: spec.max_depth,
                min_leaf: spec.min_leaf,
                max_features: None,
            };
            (ModelBody::Tree(train_dtree(train, params)?), None)
        }
        ModelKind::Forest => {
            let mut params = ForestParams::bagged(spec.n_trees, spec.max_depth, d);
            params.tree.min_leaf = spec.min_leaf;
            (ModelBody::Forest(train_forest(train, &params, seed)?), None)
        }
        _ => {
            let layers = spec.layers(d)?;
            let mut net = Network::build(&[d], &layers, seed)?;
            let history = fit(&mut net, train, val, &spec.train_config(seed))?;
            (ModelBody::Network(net), Some(history))
        }
    };
    Ok(Trained {
        model: Model {
            kind: spec.kind,
            n_features: d,
            body,
        },
        history,
    })
}

pub const MODEL_FORMAT: &str = "cardfraud-model";
pub const MODEL_VERSION: u32 = 1;

/// Self-describing model file: the model with the feature names and the
/// scaler it expects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ModelFile<S: Scalar> {
    pub format: String,
    pub version: u32,
    pub spec: ModelSpec,
    pub feature_names: Vec<String>,
    pub scaler: Option<ScalerParams<S>>,
    pub threshold: f64,
    pub model: Model<S>,
}

impl<S: Scalar> ModelFile<S> {
    pub fn new(
        spec: ModelSpec,
        feature_names: Vec<String>,
        scaler: Option<ScalerParams<S>>,
        threshold: f64,
        model: Model<S>,
    ) -> Self {
        Self {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            spec,
            feature_names,
            scaler,
            threshold,
            model,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: Self = serde_json::from_str(&text)?;
        if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
            return Err(Error::Config(format!(
                "{}: unsupported model file {} v{}",
                path.display(),
                file.format,
                file.version
            )));
        }
        if file.feature_names.len() != file.model.n_features {
            return Err(Error::Config("model file feature list does not match the model".into()));
        }
        Ok(file)
    }

    /// Applies the stored scaler to a dataset whose columns are reordered to
    /// the training order.
    pub fn prepare(&self, ds: &Dataset<S>) -> Result<Dataset<S>> {
        let idx: Vec<usize> = self
            .feature_names
            .iter()
            .map(|n| {
                ds.feature_index(n)
                    .ok_or_else(|| Error::Schema(format!("model feature '{n}' missing from data")))
            })
            .collect::<Result<_>>()?;
        let mut features = Vec::with_capacity(ds.n_rows() * idx.len());
        for row in ds.rows() {
            let start = features.len();
            features.extend(idx.iter().map(|&j| row[j]));
            if let Some(s) = &self.scaler {
                s.transform_row(&mut features[start..]);
            }
        }
        Dataset::new(self.feature_names.clone(), features, ds.labels().to_vec())
    }
}
