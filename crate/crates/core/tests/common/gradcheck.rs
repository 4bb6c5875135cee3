//! Central finite-difference checks for layers and whole networks.

use cardfraud::nn::layer::Cache;
use cardfraud::nn::{Activation, Layer, LayerSpec, Mode, Network, Tensor};
use cardfraud::seed;
use rand::Rng;
use rand_distr::StandardNormal;

pub const STEP: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-4;
/// Coordinates checked per case; larger parameter sets are sampled.
const MAX_COORDS: usize = 400;

pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-4)
}

fn normals(n: usize, rng: &mut seed::Rng) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

fn run(layers: &[Layer<f64>], x: &Tensor<f64>, mode: Mode, mask_seed: u64) -> (Tensor<f64>, Vec<Cache<f64>>) {
    let mut rng = seed::rng(mask_seed);
    let mut t = x.clone();
    let mut caches = Vec::with_capacity(layers.len());
    for l in layers {
        let (y, c) = l.forward(t, mode, &mut rng).expect("forward");
        caches.push(c);
        t = y;
    }
    (t, caches)
}

fn projected(layers: &[Layer<f64>], x: &Tensor<f64>, mode: Mode, mask_seed: u64, c: &[f64]) -> f64 {
    let (y, _) = run(layers, x, mode, mask_seed);
    y.data().iter().zip(c).map(|(a, b)| a * b).sum()
}

fn coords(n: usize, rng: &mut seed::Rng) -> Vec<usize> {
    if n <= MAX_COORDS {
        (0..n).collect()
    } else {
        (0..MAX_COORDS).map(|_| rng.random_range(0..n)).collect()
    }
}

/// One randomized layer stack with its input.
pub struct LayerCase {
    pub layers: Vec<Layer<f64>>,
    pub input: Tensor<f64>,
    pub mode: Mode,
}

impl LayerCase {
    /// Builds `specs` on `shape` and replaces every parameter (biases
    /// included) with N(0, 0.5²) draws so no gradient is trivially zero.
    pub fn new(specs: &[LayerSpec], shape: &[usize], mode: Mode, rng: &mut seed::Rng) -> Self {
        let mut layers = Vec::new();
        let mut cur = shape.to_vec();
        for s in specs {
            let built = Layer::build(s, &cur, rng).expect("build");
            cur = s.output_shape(&cur).expect("shape");
            layers.extend(built);
        }
        for l in &mut layers {
            for p in l.params_mut() {
                for v in p.iter_mut() {
                    *v = 0.5 * rng.sample::<f64, _>(StandardNormal);
                }
            }
        }
        let n: usize = shape.iter().product();
        let input = Tensor::new(shape.to_vec(), normals(n, rng)).unwrap();
        Self { layers, input, mode }
    }

    /// Largest relative error over input and parameter coordinates for
    /// the loss `Σ c·y` with a random projection `c`.
    pub fn max_error(&mut self, rng: &mut seed::Rng) -> f64 {
        let mask_seed = rng.random();
        let (y, caches) = run(&self.layers, &self.input, self.mode, mask_seed);
        let c = normals(y.len(), rng);
        let mut dy = c.clone();
        let mut pgrads = Vec::with_capacity(self.layers.len());
        for (l, cache) in self.layers.iter().zip(&caches).rev() {
            let (pg, dx) = l.backward(cache, &dy).expect("backward");
            pgrads.push(pg);
            dy = dx;
        }
        pgrads.reverse();
        let mut worst = 0.0f64;

        for i in coords(self.input.len(), rng) {
            let orig = self.input.data()[i];
            self.input.data_mut()[i] = orig + STEP;
            let up = projected(&self.layers, &self.input, self.mode, mask_seed, &c);
            self.input.data_mut()[i] = orig - STEP;
            let down = projected(&self.layers, &self.input, self.mode, mask_seed, &c);
            self.input.data_mut()[i] = orig;
            worst = worst.max(rel_error(dy[i], (up - down) / (2.0 * STEP)));
        }

        for (li, layer_grads) in pgrads.iter().enumerate() {
            let sizes: Vec<usize> = self.layers[li].params().iter().map(|p| p.len()).collect();
            for (pi, &len) in sizes.iter().enumerate() {
                for k in coords(len, rng) {
                    let orig = self.layers[li].params()[pi][k];
                    self.layers[li].params_mut()[pi][k] = orig + STEP;
                    let up = projected(&self.layers, &self.input, self.mode, mask_seed, &c);
                    self.layers[li].params_mut()[pi][k] = orig - STEP;
                    let down = projected(&self.layers, &self.input, self.mode, mask_seed, &c);
                    self.layers[li].params_mut()[pi][k] = orig;
                    worst = worst.max(rel_error(layer_grads[pi][k], (up - down) / (2.0 * STEP)));
                }
            }
        }
        worst
    }
}

/// Random layer configuration for each checked kind.
pub fn random_case(kind: &str, rng: &mut seed::Rng) -> LayerCase {
    let mut r = |lo: usize, hi: usize| rng.random_range(lo..=hi);
    let (specs, shape, mode) = match kind {
        "dense" | "dense_relu" | "dense_sigmoid" | "dense_tanh" | "dense_softmax" => {
            let act = match kind {
                "dense_relu" => Some(Activation::Relu),
                "dense_sigmoid" => Some(Activation::Sigmoid),
                "dense_tanh" => Some(Activation::Tanh),
                "dense_softmax" => Some(Activation::Softmax),
                _ => None,
            };
            let (n, u) = (r(1, 8), r(1, 8));
            (vec![LayerSpec::dense(u, act)], vec![n], Mode::Infer)
        }
        "conv1d" => {
            let (len, cin) = (r(1, 6), r(1, 4));
            let (k, ch) = (r(1, len), r(1, 5));
            (
                vec![LayerSpec::Conv1d { channels: ch, kernel: k, activation: None }],
                vec![len, cin],
                Mode::Infer,
            )
        }
        "conv2d" => {
            let (h, w, cin) = (r(1, 5), r(1, 5), r(1, 3));
            let (k, ch) = (r(1, h.min(w)), r(1, 4));
            (
                vec![LayerSpec::Conv2d { channels: ch, kernel: k, activation: None }],
                vec![h, w, cin],
                Mode::Infer,
            )
        }
        "lstm_tanh" | "lstm_relu" => {
            let inner = if kind == "lstm_tanh" { Activation::Tanh } else { Activation::Relu };
            let (steps, feat, hidden) = (r(1, 4), r(1, 4), r(1, 6));
            (vec![LayerSpec::Lstm { hidden, inner }], vec![steps, feat], Mode::Infer)
        }
        "relu" | "sigmoid" | "tanh" => {
            let activation = match kind {
                "relu" => Activation::Relu,
                "sigmoid" => Activation::Sigmoid,
                _ => Activation::Tanh,
            };
            (vec![LayerSpec::Activation { activation }], vec![r(1, 5), r(1, 5)], Mode::Infer)
        }
        "softmax" => (
            vec![LayerSpec::Activation { activation: Activation::Softmax }],
            vec![r(1, 10)],
            Mode::Infer,
        ),
        "dropout_infer" | "dropout_train" => {
            let rate = 0.1 + 0.6 * rng.random::<f64>();
            let mode = if kind == "dropout_train" { Mode::Train } else { Mode::Infer };
            let shape = vec![rng.random_range(1..=6), rng.random_range(1..=6)];
            (vec![LayerSpec::Dropout { rate }], shape, mode)
        }
        "maxpool1d" => {
            let (len, c) = (r(1, 8), r(1, 4));
            (vec![LayerSpec::Maxpool1d { pool: r(1, len) }], vec![len, c], Mode::Infer)
        }
        "flatten" => (vec![LayerSpec::Flatten], vec![r(1, 4), r(1, 4), r(1, 3)], Mode::Infer),
        "reshape" => {
            let (a, b) = (r(1, 5), r(1, 5));
            (vec![LayerSpec::Reshape { shape: vec![b, a] }], vec![a * b], Mode::Infer)
        }
        other => panic!("unknown layer kind {other}"),
    };
    LayerCase::new(&specs, &shape, mode, rng)
}

pub const LAYER_KINDS: [&str; 18] = [
    "dense",
    "dense_relu",
    "dense_sigmoid",
    "dense_tanh",
    "dense_softmax",
    "conv1d",
    "conv2d",
    "lstm_tanh",
    "lstm_relu",
    "relu",
    "sigmoid",
    "tanh",
    "softmax",
    "dropout_infer",
    "dropout_train",
    "maxpool1d",
    "flatten",
    "reshape",
];

/// Worst relative error over `trials` random configurations of `kind`.
pub fn check_kind(kind: &str, trials: usize, seed: u64) -> f64 {
    let mut rng = seed::rng(seed);
    (0..trials)
        .map(|_| random_case(kind, &mut rng).max_error(&mut rng))
        .fold(0.0, f64::max)
}

/// Relative error of the network's mean BCE gradient on a small random
/// batch, sampling at most `max_coords` parameters. Training mode is used
/// so dropout masks are part of the check.
pub fn check_network(net: &mut Network<f64>, max_coords: usize, seed: u64) -> f64 {
    let mut rng = seed::rng(seed);
    let width = net.input_width();
    let rows: Vec<Vec<f64>> = (0..3).map(|_| normals(width, &mut rng)).collect();
    let labels = [0u8, 1, 1];
    let mask_seed: u64 = rng.random();
    let eval = |net: &Network<f64>| {
        let batch: Vec<(&[f64], u8)> = rows.iter().map(|r| r.as_slice()).zip(labels).collect();
        net.loss_and_grad(&batch, Mode::Train, &mut seed::rng(mask_seed)).expect("loss")
    };
    let (_, grads) = eval(net);
    let flat: Vec<(usize, usize)> = grads
        .iter()
        .enumerate()
        .flat_map(|(p, g)| (0..g.len()).map(move |k| (p, k)))
        .collect();
    let picks: Vec<(usize, usize)> = if flat.len() <= max_coords {
        flat
    } else {
        (0..max_coords).map(|_| flat[rng.random_range(0..flat.len())]).collect()
    };
    let mut worst = 0.0f64;
    for (p, k) in picks {
        let orig = net.params()[p][k];
        net.params_mut()[p][k] = orig + STEP;
        let up = eval(net).0;
        net.params_mut()[p][k] = orig - STEP;
        let down = eval(net).0;
        net.params_mut()[p][k] = orig;
        worst = worst.max(rel_error(grads[p][k], (up - down) / (2.0 * STEP)));
    }
    worst
}
