use std::path::Path;

use serde::{Deserialize, Serialize};

use super::layer::{infer_shapes, Cache, Layer, LayerSpec};
use super::ops::{bce_loss, Activation, Mode};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seed;

/// Feed-forward stack of layers ending in a single probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Network<S: Scalar> {
    input_shape: Vec<usize>,
    layers: Vec<Layer<S>>,
}

/// Parameter gradients in [`Network::params`] order.
pub type Gradients<S> = Vec<Vec<S>>;

impl<S: Scalar> Network<S> {
    /// Builds and initializes a network from layer specs. Shapes are checked
    /// before any parameter is drawn; the output must be a single value.
    pub fn build(input_shape: &[usize], specs: &[LayerSpec], seed: u64) -> Result<Self> {
        let shapes = infer_shapes(input_shape, specs)?;
        if shapes.last().map(Vec::as_slice) != Some(&[1]) {
            return Err(Error::Shape(format!(
                "network output must be [1], got {:?}",
                shapes.last()
            )));
        }
        let mut rng = seed::rng(seed);
        let mut layers = Vec::new();
        for (spec, shape) in specs.iter().zip(&shapes) {
            layers.extend(Layer::build(spec, shape, &mut rng)?);
        }
        Self::from_layers(input_shape.to_vec(), layers)
    }

    pub fn from_layers(input_shape: Vec<usize>, layers: Vec<Layer<S>>) -> Result<Self> {
        let net = Self {
            input_shape,
            layers,
        };
        let shapes = net.shapes()?;
        if shapes.last().map(Vec::as_slice) != Some(&[1]) {
            return Err(Error::Shape("network output must be [1]".into()));
        }
        Ok(net)
    }

    /// Shape after each layer, starting with the input.
    pub fn shapes(&self) -> Result<Vec<Vec<usize>>> {
        let mut shapes = vec![self.input_shape.clone()];
        for (i, layer) in self.layers.iter().enumerate() {
            let next = layer
                .output_shape(shapes.last().unwrap())
                .map_err(|e| Error::Shape(format!("layer {i} ({}): {e}", layer.name())))?;
            shapes.push(next);
        }
        Ok(shapes)
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn input_width(&self) -> usize {
        self.input_shape.iter().product()
    }

    pub fn layers(&self) -> &[Layer<S>] {
        &self.layers
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(Layer::n_params).sum()
    }

    pub fn params(&self) -> Vec<&[S]> {
        self.layers.iter().flat_map(Layer::params).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Vec<S>> {
        self.layers.iter_mut().flat_map(Layer::params_mut).collect()
    }

    pub fn zero_gradients(&self) -> Gradients<S> {
        self.params().iter().map(|p| vec![S::zero(); p.len()]).collect()
    }

    fn sigmoid_head(&self) -> bool {
        matches!(
            self.layers.last(),
            Some(Layer::Activation {
                activation: Activation::Sigmoid
            })
        )
    }

    /// Forward pass on one row. Returns the output probability and the
    /// per-layer caches for [`Network::backward`].
    pub fn forward(
        &self,
        row: &[S],
        mode: Mode,
        rng: &mut seed::Rng,
    ) -> Result<(S, Vec<Cache<S>>)> {
        if row.len() != self.input_width() {
            return Err(Error::Shape(format!(
                "row has {} values, network expects {:?}",
                row.len(),
                self.input_shape
            )));
        }
        let mut x = Tensor::new(self.input_shape.clone(), row.to_vec())?;
        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (y, cache) = layer.forward(x, mode, rng)?;
            caches.push(cache);
            x = y;
        }
        let p = x.data()[0];
        if !p.is_finite() {
            return Err(Error::NonFinite("network output".into()));
        }
        Ok((p, caches))
    }

    pub fn predict_proba(&self, row: &[S]) -> Result<S> {
        // Inference never draws from the generator.
        let mut rng = seed::rng(0);
        self.forward(row, Mode::Infer, &mut rng).map(|(p, _)| p)
    }

    /// Accumulates `scale · ∂BCE(p, y)/∂θ` into `grads`.
    ///
    /// With a sigmoid head the loss gradient enters at the pre-activation as
    /// `p − y`, skipping the sigmoid's own backward step.
    pub fn backward(
        &self,
        caches: &[Cache<S>],
        p: S,
        y: u8,
        scale: S,
        grads: &mut Gradients<S>,
    ) -> Result<()> {
        if caches.len() != self.layers.len() {
            return Err(Error::InvalidArgument(format!(
                "backward needs {} forward caches, got {}",
                self.layers.len(),
                caches.len()
            )));
        }
        let target = S::of(f64::from(y));
        let (mut dy, top) = if self.sigmoid_head() {
            (vec![(p - target) * scale], self.layers.len() - 1)
        } else {
            let eps = S::of(super::ops::BCE_EPS);
            let pc = p.max(eps).min(S::one() - eps);
            let d = -(target / pc) + (S::one() - target) / (S::one() - pc);
            (vec![d * scale], self.layers.len())
        };
        let mut offsets = Vec::with_capacity(self.layers.len() + 1);
        let mut acc = 0;
        for l in &self.layers {
            offsets.push(acc);
            acc += l.params().len();
        }
        for li in (0..top).rev() {
            let (pg, dx) = self.layers[li].backward(&caches[li], &dy)?;
            for (k, g) in pg.into_iter().enumerate() {
                for (a, b) in grads[offsets[li] + k].iter_mut().zip(g) {
                    *a += b;
                }
            }
            dy = dx;
        }
        if grads.iter().flatten().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("gradient".into()));
        }
        Ok(())
    }

    /// Mean BCE over `batch` and its gradient.
    pub fn loss_and_grad(
        &self,
        batch: &[(&[S], u8)],
        mode: Mode,
        rng: &mut seed::Rng,
    ) -> Result<(S, Gradients<S>)> {
        let mut grads = self.zero_gradients();
        let scale = S::one() / S::of_usize(batch.len().max(1));
        let mut loss = S::zero();
        for &(row, y) in batch {
            let (p, caches) = self.forward(row, mode, rng)?;
            loss += bce_loss(p, y);
            self.backward(&caches, p, y, scale, &mut grads)?;
        }
        Ok((loss * scale, grads))
    }

    /// Mean BCE in inference mode.
    pub fn loss(&self, batch: &[(&[S], u8)]) -> Result<S> {
        let mut total = S::zero();
        for &(row, y) in batch {
            total += bce_loss(self.predict_proba(row)?, y);
        }
        Ok(total / S::of_usize(batch.len().max(1)))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&NetworkFile {
            format: NETWORK_FORMAT.into(),
            version: NETWORK_VERSION,
            network: self.clone(),
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: NetworkFile<S> = serde_json::from_str(text)?;
        if file.format != NETWORK_FORMAT || file.version != NETWORK_VERSION {
            return Err(Error::Config(format!(
                "unsupported network file {} v{}",
                file.format, file.version
            )));
        }
        Self::from_layers(file.network.input_shape, file.network.layers)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

pub const NETWORK_FORMAT: &str = "cardfraud-network";
pub const NETWORK_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(bound = "")]
struct NetworkFile<S: Scalar> {
    format: String,
    version: u32,
    network: Network<S>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Network<f64> {
        Network::build(
            &[3],
            &[
                LayerSpec::dense(4, Some(Activation::Tanh)),
                LayerSpec::dense(1, Some(Activation::Sigmoid)),
            ],
            5,
        )
        .unwrap()
    }

    #[test]
    fn sigmoid_bce_gradient_at_the_head() {
        let mut net = small();
        for p in net.params_mut() {
            p.iter_mut().for_each(|v| *v = 0.0);
        }
        let mut rng = seed::rng(0);
        let (p, caches) = net.forward(&[1.0, 2.0, 3.0], Mode::Train, &mut rng).unwrap();
        assert_eq!(p, 0.5);
        let mut g = net.zero_gradients();
        net.backward(&caches, p, 1, 1.0, &mut g).unwrap();
        // Output bias gradient equals the pre-activation gradient p − y.
        assert_eq!(*g.last().unwrap(), vec![-0.5]);
    }

    #[test]
    fn duplicated_rows_leave_the_mean_gradient_unchanged() {
        let net = small();
        let r: &[f64] = &[0.3, -0.7, 1.1];
        let mut rng = seed::rng(0);
        let (l1, g1) = net.loss_and_grad(&[(r, 1)], Mode::Infer, &mut rng).unwrap();
        let (l2, g2) = net.loss_and_grad(&[(r, 1), (r, 1)], Mode::Infer, &mut rng).unwrap();
        assert_eq!(l1, l2);
        for (a, b) in g1.iter().flatten().zip(g2.iter().flatten()) {
            assert!((a - b).abs() <= 1e-15 * a.abs().max(1.0));
        }
    }

    #[test]
    fn backward_without_cache_fails() {
        let net = small();
        let mut g = net.zero_gradients();
        assert!(net.backward(&[], 0.5, 1, 1.0, &mut g).is_err());
    }

    #[test]
    fn output_must_be_scalar() {
        assert!(Network::<f64>::build(&[3], &[LayerSpec::dense(2, None)], 0).is_err());
        assert!(Network::<f64>::build(&[3], &[LayerSpec::Flatten, LayerSpec::Conv1d { channels: 1, kernel: 1, activation: None }], 0).is_err());
    }

    #[test]
    fn json_round_trip() {
        let net = small();
        let back = Network::<f64>::from_json(&net.to_json().unwrap()).unwrap();
        assert_eq!(net, back);
        assert!(Network::<f64>::from_json(r#"{"format":"x","version":1,"network":{"input_shape":[1],"layers":[]}}"#).is_err());
    }

    #[test]
    fn wrong_width_is_rejected() {
        assert!(small().predict_proba(&[1.0]).is_err());
    }
}
