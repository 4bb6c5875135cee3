use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::network::{Gradients, Network};
use super::ops::Mode;
use super::optim::{adam_step, OptimizerState};
use crate::error::{Error, Result};
use crate::ingest::Dataset;
use crate::metrics::{evaluate, MetricReport};
use crate::scalar::Scalar;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs_max: usize,
    pub batch: usize,
    pub patience: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs_max: 100,
            batch: 256,
            patience: 5,
            lr: 1e-3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub val_metrics: Option<MetricReport>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were kept, when validation data was given.
    pub best_epoch: Option<usize>,
    pub stopped_early: bool,
}

// Samples per gradient chunk. Chunks are reduced in index order so results
// do not depend on the thread count.
const CHUNK: usize = 32;

fn batch_gradient<S: Scalar>(
    net: &Network<S>,
    ds: &Dataset<S>,
    idx: &[usize],
    batch_seed: u64,
) -> Result<(S, Gradients<S>)> {
    let scale = S::one() / S::of_usize(idx.len());
    let parts: Vec<Result<(S, Gradients<S>)>> = idx
        .par_chunks(CHUNK)
        .enumerate()
        .map(|(c, chunk)| {
            let mut grads = net.zero_gradients();
            let mut loss = S::zero();
            for (k, &i) in chunk.iter().enumerate() {
                let mut rng = seed::rng(seed::splitmix64(batch_seed ^ (c * CHUNK + k) as u64));
                let (p, caches) = net.forward(ds.row(i), Mode::Train, &mut rng)?;
                loss += super::ops::bce_loss(p, ds.label(i));
                net.backward(&caches, p, ds.label(i), scale, &mut grads)?;
            }
            Ok((loss, grads))
        })
        .collect();
    let mut total = S::zero();
    let mut grads = net.zero_gradients();
    for part in parts {
        let (l, g) = part?;
        total += l;
        for (a, b) in grads.iter_mut().zip(g) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }
    Ok((total * scale, grads))
}

/// Mean BCE and metrics at threshold 0.5, in inference mode.
pub fn evaluate_network<S: Scalar>(net: &Network<S>, ds: &Dataset<S>) -> Result<(f64, MetricReport)> {
    let probs: Vec<S> = (0..ds.n_rows())
        .into_par_iter()
        .map(|i| net.predict_proba(ds.row(i)))
        .collect::<Result<_>>()?;
    let loss = probs
        .iter()
        .zip(ds.labels())
        .map(|(&p, &y)| super::ops::bce_loss(p, y).as_f64())
        .sum::<f64>()
        / ds.n_rows().max(1) as f64;
    let pred: Vec<u8> = probs.iter().map(|&p| u8::from(p >= S::of(0.5))).collect();
    Ok((loss, evaluate(ds.labels(), &pred)?))
}

/// Mini-batch training with per-epoch shuffling. With validation data,
/// training stops after `patience` epochs without a new best validation
/// loss and the best parameters are restored.
pub fn fit<S: Scalar>(
    net: &mut Network<S>,
    train: &Dataset<S>,
    val: Option<&Dataset<S>>,
    cfg: &TrainConfig,
) -> Result<History> {
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if cfg.batch == 0 {
        return Err(Error::InvalidArgument("batch size must be positive".into()));
    }
    for (what, ds) in std::iter::once(("training", train)).chain(val.map(|v| ("validation", v))) {
        if ds.n_features() != net.input_width() {
            return Err(Error::Shape(format!(
                "{what} set has {} features, network expects {:?}",
                ds.n_features(),
                net.input_shape()
            )));
        }
    }
    let val = val.filter(|v| !v.is_empty());
    let mut history = History::default();
    let mut opt = OptimizerState::<S>::new(cfg.lr);
    let mut order: Vec<usize> = (0..train.n_rows()).collect();
    let mut best: Option<(f64, Network<S>)> = None;
    let mut since_best = 0;
    for epoch in 0..cfg.epochs_max {
        let epoch_seed = seed::derive(cfg.seed, &format!("epoch/{epoch}"));
        order.shuffle(&mut seed::rng(epoch_seed));
        let mut loss_sum = 0.0;
        for (b, idx) in order.chunks(cfg.batch).enumerate() {
            let (loss, grads) = batch_gradient(net, train, idx, seed::splitmix64(epoch_seed ^ b as u64))
                .map_err(|e| match e {
                    Error::NonFinite(m) => Error::NonFinite(format!("{m} at epoch {epoch}, batch {b}")),
                    other => other,
                })?;
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!("loss at epoch {epoch}, batch {b}")));
            }
            loss_sum += loss.as_f64() * idx.len() as f64;
            adam_step(&mut opt, &mut net.params_mut(), &grads)?;
        }
        let train_loss = loss_sum / train.n_rows() as f64;
        let (val_loss, val_metrics) = match val {
            Some(v) => {
                let (l, m) = evaluate_network(net, v)?;
                if !l.is_finite() {
                    return Err(Error::NonFinite(format!("validation loss at epoch {epoch}")));
                }
                (Some(l), Some(m))
            }
            None => (None, None),
        };
        log::debug!("epoch {epoch}: train {train_loss:.5} val {val_loss:?}");
        history.epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            val_metrics,
        });
        if let Some(l) = val_loss {
            if best.as_ref().is_none_or(|(b, _)| l < *b) {
                best = Some((l, net.clone()));
                history.best_epoch = Some(epoch);
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= cfg.patience {
                    history.stopped_early = true;
                    break;
                }
            }
        }
    }
    if let Some((_, params)) = best {
        *net = params;
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::layer::LayerSpec;
    use crate::nn::ops::Activation;

    fn blobs(n: usize, seed: u64) -> Dataset<f64> {
        use rand::Rng;
        let mut rng = seed::rng(seed);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let c = (i % 2) as u8;
            let s = if c == 1 { 3.0 } else { -3.0 };
            x.push(s + rng.random_range(-1.0..1.0));
            x.push(s + rng.random_range(-1.0..1.0));
            y.push(c);
        }
        Dataset::new(vec!["a".into(), "b".into()], x, y).unwrap()
    }

    fn logistic() -> Network<f64> {
        Network::build(&[2], &[LayerSpec::dense(1, Some(Activation::Sigmoid))], 1).unwrap()
    }

    #[test]
    fn zero_epochs_returns_the_initial_network() {
        let mut net = logistic();
        let before = net.clone();
        let h = fit(&mut net, &blobs(20, 0), None, &TrainConfig { epochs_max: 0, ..Default::default() }).unwrap();
        assert_eq!(net, before);
        assert!(h.epochs.is_empty());
    }

    #[test]
    fn separable_blobs() {
        let mut net = logistic();
        let cfg = TrainConfig { epochs_max: 50, batch: 16, lr: 0.05, ..Default::default() };
        let h = fit(&mut net, &blobs(200, 1), Some(&blobs(100, 2)), &cfg).unwrap();
        let m = h.epochs[h.best_epoch.unwrap()].val_metrics.unwrap();
        assert!(m.recall.value().unwrap() >= 0.95);
        assert!(m.precision.value().unwrap() >= 0.95);
    }

    #[test]
    fn identical_runs_are_bit_identical() {
        let cfg = TrainConfig { epochs_max: 3, batch: 7, ..Default::default() };
        let run = || {
            let mut net = Network::<f64>::build(
                &[2],
                &[
                    LayerSpec::dense(8, Some(Activation::Relu)),
                    LayerSpec::Dropout { rate: 0.5 },
                    LayerSpec::dense(1, Some(Activation::Sigmoid)),
                ],
                3,
            )
            .unwrap();
            fit(&mut net, &blobs(90, 4), None, &cfg).unwrap();
            net
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn width_mismatch() {
        let mut net = Network::<f64>::build(&[3], &[LayerSpec::dense(1, Some(Activation::Sigmoid))], 0).unwrap();
        assert!(fit(&mut net, &blobs(10, 0), None, &TrainConfig::default()).is_err());
    }
}
