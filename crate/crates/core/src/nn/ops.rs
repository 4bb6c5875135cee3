//! Forward and backward kernels for each layer kind.
//!
//! Layouts are row-major: dense weights `[out × in]`, conv1d input
//! `[len × c_in]` with kernels `[k × c_in × c_out]`, conv2d input
//! `[h × w × c_in]` with kernels `[k × k × c_in × c_out]`. Convolutions are
//! valid (no padding) with stride 1.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::{sigmoid, Scalar};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Sigmoid,
    Tanh,
    Softmax,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
            Activation::Tanh => "tanh",
            Activation::Softmax => "softmax",
        }
    }

    /// Element-wise application; not valid for softmax.
    pub(crate) fn scalar<S: Scalar>(self, x: S) -> S {
        match self {
            Activation::Relu => x.max(S::zero()),
            Activation::Sigmoid => sigmoid(x),
            Activation::Tanh => x.tanh(),
            Activation::Softmax => unreachable!("softmax is not element-wise"),
        }
    }

    /// Derivative expressed through the input `x` and output `y`.
    pub(crate) fn scalar_grad<S: Scalar>(self, x: S, y: S) -> S {
        match self {
            Activation::Relu => {
                if x > S::zero() {
                    S::one()
                } else {
                    S::zero()
                }
            }
            Activation::Sigmoid => y * (S::one() - y),
            Activation::Tanh => S::one() - y * y,
            Activation::Softmax => unreachable!("softmax is not element-wise"),
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "sigmoid" => Ok(Activation::Sigmoid),
            "tanh" => Ok(Activation::Tanh),
            "softmax" => Ok(Activation::Softmax),
            _ => Err(Error::InvalidArgument(format!("unknown activation '{s}'"))),
        }
    }
}

fn softmax<S: Scalar>(x: &[S]) -> Vec<S> {
    let max = x.iter().copied().fold(S::neg_infinity(), S::max);
    let e: Vec<S> = x.iter().map(|&v| (v - max).exp()).collect();
    let sum: S = e.iter().copied().sum();
    e.into_iter().map(|v| v / sum).collect()
}

pub fn activation<S: Scalar>(x: &Tensor<S>, kind: Activation) -> Result<Tensor<S>> {
    let data = match kind {
        Activation::Softmax => {
            if x.shape().len() != 1 {
                return Err(Error::Shape(format!(
                    "softmax needs a vector, got shape {:?}",
                    x.shape()
                )));
            }
            softmax(x.data())
        }
        k => x.data().iter().map(|&v| k.scalar(v)).collect(),
    };
    let y = Tensor::new(x.shape().to_vec(), data)?;
    y.check_finite(kind.name())?;
    Ok(y)
}

pub fn activation_backward<S: Scalar>(kind: Activation, x: &[S], y: &[S], dy: &[S]) -> Vec<S> {
    match kind {
        Activation::Softmax => {
            let dot: S = y.iter().zip(dy).map(|(&a, &b)| a * b).sum();
            y.iter().zip(dy).map(|(&yi, &g)| yi * (g - dot)).collect()
        }
        k => x
            .iter()
            .zip(y)
            .zip(dy)
            .map(|((&xi, &yi), &g)| g * k.scalar_grad(xi, yi))
            .collect(),
    }
}

/// `y = W x + b` with `W` of shape `[m × n]`.
pub fn dense_forward<S: Scalar>(w: &[S], b: &[S], x: &[S]) -> Result<Vec<S>> {
    let (m, n) = (b.len(), x.len());
    if w.len() != m * n {
        return Err(Error::Shape(format!(
            "dense weights hold {} values, expected {m}×{n}",
            w.len()
        )));
    }
    let y: Vec<S> = if n == 0 {
        b.to_vec()
    } else {
        w.chunks_exact(n)
            .zip(b)
            .map(|(row, &bi)| row.iter().zip(x).map(|(&a, &v)| a * v).sum::<S>() + bi)
            .collect()
    };
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("dense output".into()));
    }
    Ok(y)
}

/// Returns `(dW, db, dx)`.
pub fn dense_backward<S: Scalar>(w: &[S], x: &[S], dy: &[S]) -> (Vec<S>, Vec<S>, Vec<S>) {
    let n = x.len();
    let mut dw = Vec::with_capacity(w.len());
    for &g in dy {
        dw.extend(x.iter().map(|&v| g * v));
    }
    let mut dx = vec![S::zero(); n];
    if n > 0 {
        for (row, &g) in w.chunks_exact(n).zip(dy) {
            for (d, &a) in dx.iter_mut().zip(row) {
                *d += g * a;
            }
        }
    }
    (dw, dy.to_vec(), dx)
}

fn dims<const N: usize>(t: &Tensor<impl Scalar>, what: &str) -> Result<[usize; N]> {
    t.shape()
        .try_into()
        .map_err(|_| Error::Shape(format!("{what}: expected rank {N}, got {:?}", t.shape())))
}

pub fn conv2d_forward<S: Scalar>(
    input: &Tensor<S>,
    kernels: &Tensor<S>,
    bias: &[S],
) -> Result<Tensor<S>> {
    let [h, w, c_in] = dims::<3>(input, "conv2d input")?;
    let [k, k2, kc, c_out] = dims::<4>(kernels, "conv2d kernels")?;
    if k != k2 || kc != c_in || bias.len() != c_out {
        return Err(Error::Shape(format!(
            "conv2d kernels {:?} / bias {} incompatible with input {:?}",
            kernels.shape(),
            bias.len(),
            input.shape()
        )));
    }
    if k == 0 || k > h || k > w {
        return Err(Error::Shape(format!("kernel {k}×{k} larger than input {h}×{w}")));
    }
    let (oh, ow) = (h - k + 1, w - k + 1);
    let x = input.data();
    let kd = kernels.data();
    let mut out = Vec::with_capacity(oh * ow * c_out);
    for i in 0..oh {
        for j in 0..ow {
            let mut acc = bias.to_vec();
            for di in 0..k {
                for dj in 0..k {
                    let xoff = ((i + di) * w + (j + dj)) * c_in;
                    let koff = (di * k + dj) * c_in * c_out;
                    for ci in 0..c_in {
                        let xv = x[xoff + ci];
                        let krow = &kd[koff + ci * c_out..koff + (ci + 1) * c_out];
                        for (a, &kv) in acc.iter_mut().zip(krow) {
                            *a += xv * kv;
                        }
                    }
                }
            }
            out.extend(acc);
        }
    }
    let y = Tensor::new(vec![oh, ow, c_out], out)?;
    y.check_finite("conv2d output")?;
    Ok(y)
}

/// Returns `(d_kernels, d_bias, d_input)`.
pub fn conv2d_backward<S: Scalar>(
    input: &Tensor<S>,
    kernels: &Tensor<S>,
    dy: &[S],
) -> (Vec<S>, Vec<S>, Vec<S>) {
    let [h, w, c_in] = [input.shape()[0], input.shape()[1], input.shape()[2]];
    let [k, _, _, c_out] = [
        kernels.shape()[0],
        kernels.shape()[1],
        kernels.shape()[2],
        kernels.shape()[3],
    ];
    let (oh, ow) = (h - k + 1, w - k + 1);
    let x = input.data();
    let kd = kernels.data();
    let mut dk = vec![S::zero(); kd.len()];
    let mut db = vec![S::zero(); c_out];
    let mut dx = vec![S::zero(); x.len()];
    for i in 0..oh {
        for j in 0..ow {
            let g = &dy[(i * ow + j) * c_out..(i * ow + j + 1) * c_out];
            for (d, &gv) in db.iter_mut().zip(g) {
                *d += gv;
            }
            for di in 0..k {
                for dj in 0..k {
                    let xoff = ((i + di) * w + (j + dj)) * c_in;
                    let koff = (di * k + dj) * c_in * c_out;
                    for ci in 0..c_in {
                        let xv = x[xoff + ci];
                        let base = koff + ci * c_out;
                        let mut acc = S::zero();
                        for co in 0..c_out {
                            dk[base + co] += xv * g[co];
                            acc += kd[base + co] * g[co];
                        }
                        dx[xoff + ci] += acc;
                    }
                }
            }
        }
    }
    (dk, db, dx)
}

pub fn conv1d_forward<S: Scalar>(
    input: &Tensor<S>,
    kernels: &Tensor<S>,
    bias: &[S],
) -> Result<Tensor<S>> {
    let [len, c_in] = dims::<2>(input, "conv1d input")?;
    let [k, kc, c_out] = dims::<3>(kernels, "conv1d kernels")?;
    if kc != c_in || bias.len() != c_out {
        return Err(Error::Shape(format!(
            "conv1d kernels {:?} / bias {} incompatible with input {:?}",
            kernels.shape(),
            bias.len(),
            input.shape()
        )));
    }
    if k == 0 || k > len {
        return Err(Error::Shape(format!("kernel length {k} exceeds input length {len}")));
    }
    let ol = len - k + 1;
    let x = input.data();
    let kd = kernels.data();
    let mut out = Vec::with_capacity(ol * c_out);
    for t in 0..ol {
        let mut acc = bias.to_vec();
        for dt in 0..k {
            for ci in 0..c_in {
                let xv = x[(t + dt) * c_in + ci];
                let krow = &kd[(dt * c_in + ci) * c_out..(dt * c_in + ci + 1) * c_out];
                for (a, &kv) in acc.iter_mut().zip(krow) {
                    *a += xv * kv;
                }
            }
        }
        out.extend(acc);
    }
    let y = Tensor::new(vec![ol, c_out], out)?;
    y.check_finite("conv1d output")?;
    Ok(y)
}

pub fn conv1d_backward<S: Scalar>(
    input: &Tensor<S>,
    kernels: &Tensor<S>,
    dy: &[S],
) -> (Vec<S>, Vec<S>, Vec<S>) {
    let [len, c_in] = [input.shape()[0], input.shape()[1]];
    let [k, _, c_out] = [kernels.shape()[0], kernels.shape()[1], kernels.shape()[2]];
    let ol = len - k + 1;
    let x = input.data();
    let kd = kernels.data();
    let mut dk = vec![S::zero(); kd.len()];
    let mut db = vec![S::zero(); c_out];
    let mut dx = vec![S::zero(); x.len()];
    for t in 0..ol {
        let g = &dy[t * c_out..(t + 1) * c_out];
        for (d, &gv) in db.iter_mut().zip(g) {
            *d += gv;
        }
        for dt in 0..k {
            for ci in 0..c_in {
                let xi = (t + dt) * c_in + ci;
                let base = (dt * c_in + ci) * c_out;
                let mut acc = S::zero();
                for co in 0..c_out {
                    dk[base + co] += x[xi] * g[co];
                    acc += kd[base + co] * g[co];
                }
                dx[xi] += acc;
            }
        }
    }
    (dk, db, dx)
}

/// Channel-wise max over non-overlapping windows of `pool` steps; trailing
/// steps that do not fill a window are discarded. Also returns the source
/// index of each output (first maximum on ties).
pub fn maxpool1d<S: Scalar>(input: &Tensor<S>, pool: usize) -> Result<(Tensor<S>, Vec<usize>)> {
    let [len, c] = dims::<2>(input, "maxpool1d input")?;
    if pool == 0 {
        return Err(Error::InvalidArgument("pool size must be ≥ 1".into()));
    }
    if pool > len {
        return Err(Error::Shape(format!("pool {pool} exceeds length {len}")));
    }
    let ol = len / pool;
    let x = input.data();
    let mut out = Vec::with_capacity(ol * c);
    let mut arg = Vec::with_capacity(ol * c);
    for t in 0..ol {
        for ch in 0..c {
            let mut best = t * pool * c + ch;
            for s in 1..pool {
                let idx = (t * pool + s) * c + ch;
                if x[idx] > x[best] {
                    best = idx;
                }
            }
            out.push(x[best]);
            arg.push(best);
        }
    }
    Ok((Tensor::new(vec![ol, c], out)?, arg))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Inverted dropout: in training each element is zeroed with probability
/// `rate` and survivors are scaled by `1/(1-rate)`; inference is identity.
/// Returns the output and the per-element multiplier.
pub fn dropout_with<S: Scalar>(
    input: &Tensor<S>,
    rate: f64,
    mode: Mode,
    rng: &mut seed::Rng,
) -> Result<(Tensor<S>, Vec<S>)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::InvalidArgument(format!("dropout rate {rate} outside [0,1)")));
    }
    if mode == Mode::Infer || rate == 0.0 {
        return Ok((input.clone(), vec![S::one(); input.len()]));
    }
    let keep = S::of(1.0 / (1.0 - rate));
    let mask: Vec<S> = (0..input.len())
        .map(|_| {
            if rng.random::<f64>() < rate {
                S::zero()
            } else {
                keep
            }
        })
        .collect();
    let data = input.data().iter().zip(&mask).map(|(&v, &m)| v * m).collect();
    Ok((Tensor::new(input.shape().to_vec(), data)?, mask))
}

pub fn dropout<S: Scalar>(input: &Tensor<S>, rate: f64, mode: Mode, seed: u64) -> Result<Tensor<S>> {
    dropout_with(input, rate, mode, &mut seed::rng(seed)).map(|(t, _)| t)
}

pub const BCE_EPS: f64 = 1e-7;

/// Binary cross-entropy with `p` clamped to `[1e-7, 1 - 1e-7]`.
pub fn bce_loss<S: Scalar>(p: S, y: u8) -> S {
    let eps = S::of(BCE_EPS);
    let p = p.max(eps).min(S::one() - eps);
    if y == 1 {
        -p.ln()
    } else {
        -(S::one() - p).ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn t(shape: &[usize], data: &[f64]) -> Tensor<f64> {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn dense_cases() {
        assert_eq!(
            dense_forward(&[1.0, 0.0, 0.0, 1.0], &[0.0, 0.0], &[3.0, 4.0]).unwrap(),
            vec![3.0, 4.0]
        );
        assert_eq!(
            dense_forward(&[0.0; 4], &[1.0, -1.0], &[9.0, -7.0]).unwrap(),
            vec![1.0, -1.0]
        );
        assert_eq!(
            dense_forward(&[1.0, 2.0, 3.0, 4.0], &[0.0, 0.0], &[1.0, 1.0]).unwrap(),
            vec![3.0, 7.0]
        );
        assert!(dense_forward(&[1.0; 3], &[0.0; 2], &[1.0, 1.0]).is_err());
        assert!(matches!(
            dense_forward(&[f64::MAX, f64::MAX], &[0.0], &[f64::MAX, 1.0]),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn conv2d_cases() {
        let input = t(&[5, 6, 1], &(0..30).map(f64::from).collect::<Vec<_>>());
        let mut delta = vec![0.0; 9 * 2];
        delta[4 * 2] = 1.0; // centre tap, channel 0
        let k = t(&[3, 3, 1, 2], &delta);
        let out = conv2d_forward(&input, &k, &[0.0, 0.0]).unwrap();
        assert_eq!(out.shape(), &[3, 4, 2]);
        for i in 0..3 {
            for j in 0..4 {
                assert_eq!(out.data()[(i * 4 + j) * 2], input.data()[(i + 1) * 6 + j + 1]);
                assert_eq!(out.data()[(i * 4 + j) * 2 + 1], 0.0);
            }
        }
        let ones = conv2d_forward(&t(&[3, 3, 1], &[1.0; 9]), &t(&[3, 3, 1, 1], &[1.0; 9]), &[0.0])
            .unwrap();
        assert_eq!(ones.data(), &[9.0]);
        assert!(conv2d_forward(&t(&[2, 2, 1], &[0.0; 4]), &t(&[3, 3, 1, 1], &[0.0; 9]), &[0.0]).is_err());
    }

    #[test]
    fn conv1d_cases() {
        let out = conv1d_forward(&t(&[3, 1], &[1.0, 4.0, 9.0]), &t(&[2, 1, 1], &[1.0, -1.0]), &[0.0])
            .unwrap();
        assert_eq!(out.data(), &[-3.0, -5.0]);

        // k = 1 is a dense map per position with W[co][ci] = kernel[0][ci][co].
        let kern = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]; // [1 × 2 × 3]
        let x = [0.5, -1.5];
        let out = conv1d_forward(&t(&[1, 2], &x), &t(&[1, 2, 3], &kern), &[0.1, 0.2, 0.3]).unwrap();
        assert_eq!(out.shape(), &[1, 3]);
        let w: Vec<f64> = (0..3).flat_map(|co| (0..2).map(move |ci| kern[ci * 3 + co])).collect();
        let dense = dense_forward(&w, &[0.1, 0.2, 0.3], &x).unwrap();
        for (a, b) in out.data().iter().zip(&dense) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-15);
        }
        assert!(conv1d_forward(&t(&[1, 1], &[1.0]), &t(&[2, 1, 1], &[1.0, 1.0]), &[0.0]).is_err());
    }

    #[test]
    fn maxpool_cases() {
        let x = t(&[4, 1], &[1.0, 3.0, 2.0, 0.0]);
        assert_eq!(maxpool1d(&x, 2).unwrap().0.data(), &[3.0, 2.0]);
        assert_eq!(maxpool1d(&x, 1).unwrap().0, x);
        let c = t(&[4, 1], &[2.0; 4]);
        assert_eq!(maxpool1d(&c, 2).unwrap().0.data(), &[2.0, 2.0]);
        assert!(maxpool1d(&x, 5).is_err());
        assert!(maxpool1d(&x, 0).is_err());
    }

    #[test]
    fn dropout_modes() {
        let x = t(&[5], &[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(dropout(&x, 0.7, Mode::Infer, 1).unwrap(), x);
        assert_eq!(dropout(&x, 0.0, Mode::Train, 1).unwrap(), x);
        assert!(dropout(&x, 1.0, Mode::Train, 1).is_err());
        let big = Tensor::<f64>::new(vec![100_000], vec![1.0; 100_000]).unwrap();
        let y = dropout(&big, 0.5, Mode::Train, 42).unwrap();
        let mean = y.data().iter().sum::<f64>() / 1e5;
        assert!((mean - 1.0).abs() < 0.02, "mean {mean}");
        assert!(y.data().iter().all(|&v| v == 0.0 || v == 2.0));
    }

    #[test]
    fn activation_fixed_points() {
        let z = t(&[3], &[0.0, 0.0, -2.0]);
        assert_eq!(activation(&z, Activation::Sigmoid).unwrap().data()[0], 0.5);
        assert_eq!(activation(&z, Activation::Tanh).unwrap().data()[0], 0.0);
        assert_eq!(activation(&z, Activation::Relu).unwrap().data()[2], 0.0);
        let s = activation(&t(&[4], &[3.0; 4]), Activation::Softmax).unwrap();
        assert_eq!(s.data(), &[0.25; 4]);
        assert!(activation(&t(&[2, 2], &[0.0; 4]), Activation::Softmax).is_err());
    }

    #[test]
    fn sigmoid_is_stable_at_large_magnitude() {
        // 1/(1+e^36) and its complement from a 50-digit evaluation.
        let lo: f64 = sigmoid(-36.0);
        let hi: f64 = sigmoid(36.0);
        assert!(lo > 0.0 && lo < 1.0 && hi > 0.0 && hi < 1.0);
        assert_abs_diff_eq!(lo, 2.319_522_830_243_568_6e-16, epsilon = 1e-29);
        assert_eq!(hi, 1.0 - 2.220_446_049_250_313e-16);
        let extreme: f64 = sigmoid(-800.0);
        assert!(extreme.is_finite());
    }

    #[test]
    fn bce_values() {
        assert_abs_diff_eq!(bce_loss(0.5, 1), std::f64::consts::LN_2, epsilon = 1e-15);
        assert_abs_diff_eq!(bce_loss(0.5, 0), std::f64::consts::LN_2, epsilon = 1e-15);
        assert_abs_diff_eq!(bce_loss(1.0 - 1e-7, 1), 1e-7, epsilon = 1e-12);
        assert_abs_diff_eq!(bce_loss(0.9, 0), 2.302_585_092_994_045_6, epsilon = 1e-12);
        assert!(bce_loss(0.0f64, 1).is_finite());
    }
}
