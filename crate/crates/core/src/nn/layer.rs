use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::lstm::{lstm_backward, lstm_sequence, LstmParams, StepCache};
use super::ops::{self, Activation, Mode};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seed;

/// Architecture description of one layer. `activation` on dense and
/// convolution layers expands to a separate activation layer and selects
/// the weight initializer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Dense {
        units: usize,
        activation: Option<Activation>,
    },
    Conv1d {
        channels: usize,
        kernel: usize,
        activation: Option<Activation>,
    },
    Conv2d {
        channels: usize,
        kernel: usize,
        activation: Option<Activation>,
    },
    Maxpool1d {
        pool: usize,
    },
    Dropout {
        rate: f64,
    },
    Flatten,
    Reshape {
        shape: Vec<usize>,
    },
    /// Consumes a `[steps × features]` sequence, emits the last hidden state.
    Lstm {
        hidden: usize,
        inner: Activation,
    },
    Activation {
        activation: Activation,
    },
}

impl LayerSpec {
    pub fn dense(units: usize, activation: Option<Activation>) -> Self {
        LayerSpec::Dense { units, activation }
    }

    /// Output shape for `input`, or an error if the layer cannot accept it.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let bad = |msg: String| Err(Error::Shape(msg));
        match self {
            LayerSpec::Dense { units, .. } => {
                if input.len() != 1 {
                    return bad(format!("dense expects a flat input, got {input:?}"));
                }
                if *units == 0 {
                    return bad("dense units must be positive".into());
                }
                Ok(vec![*units])
            }
            LayerSpec::Conv1d { channels, kernel, .. } => match input {
                [len, _] if *kernel >= 1 && kernel <= len && *channels > 0 => {
                    Ok(vec![len - kernel + 1, *channels])
                }
                _ => bad(format!("conv1d kernel {kernel} cannot apply to {input:?}")),
            },
            LayerSpec::Conv2d { channels, kernel, .. } => match input {
                [h, w, _] if *kernel >= 1 && kernel <= h && kernel <= w && *channels > 0 => {
                    Ok(vec![h - kernel + 1, w - kernel + 1, *channels])
                }
                _ => bad(format!("conv2d kernel {kernel}×{kernel} cannot apply to {input:?}")),
            },
            LayerSpec::Maxpool1d { pool } => match input {
                [len, c] if *pool >= 1 && pool <= len => Ok(vec![len / pool, *c]),
                _ => bad(format!("maxpool1d pool {pool} cannot apply to {input:?}")),
            },
            LayerSpec::Dropout { rate } => {
                if (0.0..1.0).contains(rate) {
                    Ok(input.to_vec())
                } else {
                    bad(format!("dropout rate {rate} outside [0,1)"))
                }
            }
            LayerSpec::Flatten => Ok(vec![input.iter().product()]),
            LayerSpec::Reshape { shape } => {
                if shape.iter().product::<usize>() == input.iter().product::<usize>() {
                    Ok(shape.clone())
                } else {
                    bad(format!("cannot reshape {input:?} to {shape:?}"))
                }
            }
            LayerSpec::Lstm { hidden, .. } => match input {
                [steps, feat] if *steps > 0 && *feat > 0 && *hidden > 0 => Ok(vec![*hidden]),
                _ => bad(format!("lstm expects [steps × features], got {input:?}")),
            },
            LayerSpec::Activation { activation } => {
                if *activation == Activation::Softmax && input.len() != 1 {
                    bad(format!("softmax expects a vector, got {input:?}"))
                } else {
                    Ok(input.to_vec())
                }
            }
        }
    }
}

/// Shapes after each layer, starting with `input`.
pub fn infer_shapes(input: &[usize], specs: &[LayerSpec]) -> Result<Vec<Vec<usize>>> {
    let mut shapes = vec![input.to_vec()];
    for (i, spec) in specs.iter().enumerate() {
        let next = spec
            .output_shape(shapes.last().unwrap())
            .map_err(|e| Error::Shape(format!("layer {i} ({spec:?}): {e}")))?;
        shapes.push(next);
    }
    Ok(shapes)
}

fn uniform<S: Scalar>(n: usize, limit: f64, rng: &mut seed::Rng) -> Vec<S> {
    (0..n)
        .map(|_| S::of(rng.random_range(-limit..=limit)))
        .collect()
}

/// He-uniform for relu, Glorot-uniform otherwise.
fn init_limit(act: Option<Activation>, fan_in: usize, fan_out: usize) -> f64 {
    match act {
        Some(Activation::Relu) => (6.0 / fan_in as f64).sqrt(),
        _ => (6.0 / (fan_in + fan_out) as f64).sqrt(),
    }
}

/// A layer with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", bound = "")]
pub enum Layer<S: Scalar> {
    Dense {
        inputs: usize,
        units: usize,
        w: Vec<S>,
        b: Vec<S>,
    },
    Conv1d {
        /// `[k, c_in, c_out]`
        shape: [usize; 3],
        kernel: Vec<S>,
        bias: Vec<S>,
    },
    Conv2d {
        /// `[k, k, c_in, c_out]`
        shape: [usize; 4],
        kernel: Vec<S>,
        bias: Vec<S>,
    },
    Maxpool1d {
        pool: usize,
    },
    Dropout {
        rate: f64,
    },
    Flatten,
    Reshape {
        shape: Vec<usize>,
    },
    Lstm {
        params: LstmParams<S>,
        inner: Activation,
    },
    Activation {
        activation: Activation,
    },
}

/// Values a layer keeps from its forward pass.
#[derive(Debug, Clone)]
pub enum Cache<S: Scalar> {
    Input(Tensor<S>),
    Pool { in_shape: Vec<usize>, arg: Vec<usize> },
    Mask(Vec<S>),
    Shape(Vec<usize>),
    Lstm(Vec<StepCache<S>>),
    Act { x: Tensor<S>, y: Tensor<S> },
}

impl<S: Scalar> Layer<S> {
    /// Instantiates `spec` for `input` shape, appending an activation layer
    /// when the spec names one.
    pub fn build(spec: &LayerSpec, input: &[usize], rng: &mut seed::Rng) -> Result<Vec<Self>> {
        spec.output_shape(input)?;
        let mut out = Vec::with_capacity(2);
        let act = match spec {
            LayerSpec::Dense { units, activation } => {
                let n = input[0];
                let lim = init_limit(*activation, n, *units);
                out.push(Layer::Dense {
                    inputs: n,
                    units: *units,
                    w: uniform(n * units, lim, rng),
                    b: vec![S::zero(); *units],
                });
                *activation
            }
            LayerSpec::Conv1d { channels, kernel, activation } => {
                let c_in = input[1];
                let lim = init_limit(*activation, kernel * c_in, kernel * channels);
                out.push(Layer::Conv1d {
                    shape: [*kernel, c_in, *channels],
                    kernel: uniform(kernel * c_in * channels, lim, rng),
                    bias: vec![S::zero(); *channels],
                });
                *activation
            }
            LayerSpec::Conv2d { channels, kernel, activation } => {
                let c_in = input[2];
                let area = kernel * kernel;
                let lim = init_limit(*activation, area * c_in, area * channels);
                out.push(Layer::Conv2d {
                    shape: [*kernel, *kernel, c_in, *channels],
                    kernel: uniform(area * c_in * channels, lim, rng),
                    bias: vec![S::zero(); *channels],
                });
                *activation
            }
            LayerSpec::Maxpool1d { pool } => {
                out.push(Layer::Maxpool1d { pool: *pool });
                None
            }
            LayerSpec::Dropout { rate } => {
                out.push(Layer::Dropout { rate: *rate });
                None
            }
            LayerSpec::Flatten => {
                out.push(Layer::Flatten);
                None
            }
            LayerSpec::Reshape { shape } => {
                out.push(Layer::Reshape { shape: shape.clone() });
                None
            }
            LayerSpec::Lstm { hidden, inner } => {
                let feat = input[1];
                let lim = init_limit(None, hidden + feat, *hidden);
                let mut params = LstmParams::zeros(*hidden, feat);
                for w in params.w.iter_mut() {
                    *w = uniform(w.len(), lim, rng);
                }
                out.push(Layer::Lstm {
                    params,
                    inner: *inner,
                });
                None
            }
            LayerSpec::Activation { activation } => Some(*activation),
        };
        if let Some(activation) = act {
            out.push(Layer::Activation { activation });
        }
        Ok(out)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Layer::Dense { .. } => "dense",
            Layer::Conv1d { .. } => "conv1d",
            Layer::Conv2d { .. } => "conv2d",
            Layer::Maxpool1d { .. } => "maxpool1d",
            Layer::Dropout { .. } => "dropout",
            Layer::Flatten => "flatten",
            Layer::Reshape { .. } => "reshape",
            Layer::Lstm { .. } => "lstm",
            Layer::Activation { .. } => "activation",
        }
    }

    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let spec = match self {
            Layer::Dense { units, inputs, .. } => {
                if input != [*inputs] {
                    return Err(Error::Shape(format!("dense expects [{inputs}], got {input:?}")));
                }
                LayerSpec::dense(*units, None)
            }
            Layer::Conv1d { shape, .. } => {
                if input.get(1) != Some(&shape[1]) {
                    return Err(Error::Shape(format!("conv1d expects {} channels, got {input:?}", shape[1])));
                }
                LayerSpec::Conv1d { channels: shape[2], kernel: shape[0], activation: None }
            }
            Layer::Conv2d { shape, .. } => {
                if input.get(2) != Some(&shape[2]) {
                    return Err(Error::Shape(format!("conv2d expects {} channels, got {input:?}", shape[2])));
                }
                LayerSpec::Conv2d { channels: shape[3], kernel: shape[0], activation: None }
            }
            Layer::Maxpool1d { pool } => LayerSpec::Maxpool1d { pool: *pool },
            Layer::Dropout { rate } => LayerSpec::Dropout { rate: *rate },
            Layer::Flatten => LayerSpec::Flatten,
            Layer::Reshape { shape } => LayerSpec::Reshape { shape: shape.clone() },
            Layer::Lstm { params, inner } => {
                if input.get(1) != Some(&params.input) {
                    return Err(Error::Shape(format!("lstm expects {} features, got {input:?}", params.input)));
                }
                LayerSpec::Lstm { hidden: params.hidden, inner: *inner }
            }
            Layer::Activation { activation } => LayerSpec::Activation { activation: *activation },
        };
        spec.output_shape(input)
    }

    pub fn params(&self) -> Vec<&[S]> {
        match self {
            Layer::Dense { w, b, .. } => vec![w, b],
            Layer::Conv1d { kernel, bias, .. } | Layer::Conv2d { kernel, bias, .. } => {
                vec![kernel, bias]
            }
            Layer::Lstm { params, .. } => params
                .w
                .iter()
                .chain(params.b.iter())
                .map(Vec::as_slice)
                .collect(),
            _ => Vec::new(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Vec<S>> {
        match self {
            Layer::Dense { w, b, .. } => vec![w, b],
            Layer::Conv1d { kernel, bias, .. } | Layer::Conv2d { kernel, bias, .. } => {
                vec![kernel, bias]
            }
            Layer::Lstm { params, .. } => {
                let LstmParams { w, b, .. } = params;
                w.iter_mut().chain(b.iter_mut()).collect()
            }
            _ => Vec::new(),
        }
    }

    pub fn n_params(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    pub fn forward(
        &self,
        x: Tensor<S>,
        mode: Mode,
        rng: &mut seed::Rng,
    ) -> Result<(Tensor<S>, Cache<S>)> {
        match self {
            Layer::Dense { inputs, w, b, .. } => {
                if x.shape() != [*inputs] {
                    return Err(Error::Shape(format!(
                        "dense expects [{inputs}], got {:?}",
                        x.shape()
                    )));
                }
                let y = ops::dense_forward(w, b, x.data())?;
                Ok((Tensor::vector(y), Cache::Input(x)))
            }
            Layer::Conv1d { shape, kernel, bias } => {
                let k = Tensor::new(shape.to_vec(), kernel.clone())?;
                let y = ops::conv1d_forward(&x, &k, bias)?;
                Ok((y, Cache::Input(x)))
            }
            Layer::Conv2d { shape, kernel, bias } => {
                let k = Tensor::new(shape.to_vec(), kernel.clone())?;
                let y = ops::conv2d_forward(&x, &k, bias)?;
                Ok((y, Cache::Input(x)))
            }
            Layer::Maxpool1d { pool } => {
                let (y, arg) = ops::maxpool1d(&x, *pool)?;
                Ok((y, Cache::Pool { in_shape: x.shape().to_vec(), arg }))
            }
            Layer::Dropout { rate } => {
                let (y, mask) = ops::dropout_with(&x, *rate, mode, rng)?;
                Ok((y, Cache::Mask(mask)))
            }
            Layer::Flatten => {
                let shape = x.shape().to_vec();
                let n = x.len();
                Ok((x.reshape(vec![n])?, Cache::Shape(shape)))
            }
            Layer::Reshape { shape } => {
                let old = x.shape().to_vec();
                Ok((x.reshape(shape.clone())?, Cache::Shape(old)))
            }
            Layer::Lstm { params, inner } => {
                if x.shape().len() != 2 || x.shape()[1] != params.input {
                    return Err(Error::Shape(format!(
                        "lstm expects [steps × {}], got {:?}",
                        params.input,
                        x.shape()
                    )));
                }
                let (h, caches) = lstm_sequence(params, x.data(), *inner)?;
                Ok((Tensor::vector(h), Cache::Lstm(caches)))
            }
            Layer::Activation { activation } => {
                let y = ops::activation(&x, *activation)?;
                Ok((y.clone(), Cache::Act { x, y }))
            }
        }
    }

    /// Returns parameter gradients (in [`Layer::params`] order) and the
    /// gradient with respect to the layer input.
    pub fn backward(&self, cache: &Cache<S>, dy: &[S]) -> Result<(Vec<Vec<S>>, Vec<S>)> {
        let mismatch = || Error::InvalidArgument(format!("{} given a foreign cache", self.name()));
        match (self, cache) {
            (Layer::Dense { w, .. }, Cache::Input(x)) => {
                let (dw, db, dx) = ops::dense_backward(w, x.data(), dy);
                Ok((vec![dw, db], dx))
            }
            (Layer::Conv1d { shape, kernel, .. }, Cache::Input(x)) => {
                let k = Tensor::new(shape.to_vec(), kernel.clone())?;
                let (dk, db, dx) = ops::conv1d_backward(x, &k, dy);
                Ok((vec![dk, db], dx))
            }
            (Layer::Conv2d { shape, kernel, .. }, Cache::Input(x)) => {
                let k = Tensor::new(shape.to_vec(), kernel.clone())?;
                let (dk, db, dx) = ops::conv2d_backward(x, &k, dy);
                Ok((vec![dk, db], dx))
            }
            (Layer::Maxpool1d { .. }, Cache::Pool { in_shape, arg }) => {
                let mut dx = vec![S::zero(); in_shape.iter().product()];
                for (&src, &g) in arg.iter().zip(dy) {
                    dx[src] += g;
                }
                Ok((Vec::new(), dx))
            }
            (Layer::Dropout { .. }, Cache::Mask(mask)) => {
                Ok((Vec::new(), dy.iter().zip(mask).map(|(&g, &m)| g * m).collect()))
            }
            (Layer::Flatten | Layer::Reshape { .. }, Cache::Shape(_)) => Ok((Vec::new(), dy.to_vec())),
            (Layer::Lstm { params, inner }, Cache::Lstm(steps)) => {
                let (g, dx) = lstm_backward(params, steps, dy, *inner);
                let LstmParams { w, b, .. } = g;
                Ok((w.into_iter().chain(b).collect(), dx))
            }
            (Layer::Activation { activation }, Cache::Act { x, y }) => Ok((
                Vec::new(),
                ops::activation_backward(*activation, x.data(), y.data(), dy),
            )),
            _ => Err(mismatch()),
        }
    }
}
