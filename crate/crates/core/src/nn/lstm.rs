//! LSTM cell: forward step, sequence unrolling and backpropagation through
//! time.
//!
//! With `z = [h_{t-1}; x_t]`:
//!
//! ```text
//! f = σ(W_f z + b_f)    i = σ(W_i z + b_i)    o = σ(W_o z + b_o)
//! g = φ(W_g z + b_g)
//! C_t = f ⊙ C_{t-1} + i ⊙ g
//! h_t = o ⊙ φ(C_t)
//! ```
//!
//! `φ` is the inner activation (tanh or relu).

use serde::{Deserialize, Serialize};

use super::ops::{dense_backward, dense_forward, Activation};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Gate order used in every array below.
pub const FORGET: usize = 0;
pub const INPUT: usize = 1;
pub const CANDIDATE: usize = 2;
pub const OUTPUT: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct LstmParams<S: Scalar> {
    pub hidden: usize,
    pub input: usize,
    /// `W_f, W_i, W_g, W_o`, each `[hidden × (hidden + input)]`.
    pub w: [Vec<S>; 4],
    /// `b_f, b_i, b_g, b_o`, each `[hidden]`.
    pub b: [Vec<S>; 4],
}

impl<S: Scalar> LstmParams<S> {
    pub fn zeros(hidden: usize, input: usize) -> Self {
        let wz = vec![S::zero(); hidden * (hidden + input)];
        let bz = vec![S::zero(); hidden];
        Self {
            hidden,
            input,
            w: [wz.clone(), wz.clone(), wz.clone(), wz],
            b: [bz.clone(), bz.clone(), bz.clone(), bz],
        }
    }

    pub fn n_params(&self) -> usize {
        4 * (self.hidden * (self.hidden + self.input) + self.hidden)
    }

    fn check(&self) -> Result<()> {
        let wl = self.hidden * (self.hidden + self.input);
        if self.w.iter().any(|w| w.len() != wl) || self.b.iter().any(|b| b.len() != self.hidden) {
            return Err(Error::Shape("LSTM parameter sizes inconsistent".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState<S: Scalar> {
    pub h: Vec<S>,
    pub c: Vec<S>,
}

impl<S: Scalar> LstmState<S> {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            h: vec![S::zero(); hidden],
            c: vec![S::zero(); hidden],
        }
    }
}

/// Intermediates of one step, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct StepCache<S: Scalar> {
    z: Vec<S>,
    /// Gate outputs after their activations.
    gates: [Vec<S>; 4],
    c_prev: Vec<S>,
    c: Vec<S>,
    phi_c: Vec<S>,
}

fn step_cached<S: Scalar>(
    p: &LstmParams<S>,
    s: &LstmState<S>,
    x: &[S],
    inner: Activation,
) -> Result<(LstmState<S>, StepCache<S>)> {
    p.check()?;
    if x.len() != p.input || s.h.len() != p.hidden || s.c.len() != p.hidden {
        return Err(Error::Shape(format!(
            "LSTM step: input {} / state {} for params ({} in, {} hidden)",
            x.len(),
            s.h.len(),
            p.input,
            p.hidden
        )));
    }
    let mut z = s.h.clone();
    z.extend_from_slice(x);
    let gate = |g: usize, act: Activation| -> Result<Vec<S>> {
        Ok(dense_forward(&p.w[g], &p.b[g], &z)?
            .into_iter()
            .map(|a| act.scalar(a))
            .collect())
    };
    let f = gate(FORGET, Activation::Sigmoid)?;
    let i = gate(INPUT, Activation::Sigmoid)?;
    let g = gate(CANDIDATE, inner)?;
    let o = gate(OUTPUT, Activation::Sigmoid)?;
    let c: Vec<S> = (0..p.hidden).map(|k| f[k] * s.c[k] + i[k] * g[k]).collect();
    let phi_c: Vec<S> = c.iter().map(|&v| inner.scalar(v)).collect();
    let h: Vec<S> = o.iter().zip(&phi_c).map(|(&a, &b)| a * b).collect();
    if h.iter().chain(&c).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("LSTM state".into()));
    }
    let cache = StepCache {
        z,
        gates: [f, i, g, o],
        c_prev: s.c.clone(),
        c: c.clone(),
        phi_c,
    };
    Ok((LstmState { h, c }, cache))
}

/// One LSTM time step.
pub fn lstm_step<S: Scalar>(
    p: &LstmParams<S>,
    s: &LstmState<S>,
    x: &[S],
    inner: Activation,
) -> Result<LstmState<S>> {
    step_cached(p, s, x, inner).map(|(s, _)| s)
}

/// Runs `seq` (`[steps × input]`, row-major) from a zero state and returns
/// the final hidden state with per-step caches.
pub fn lstm_sequence<S: Scalar>(
    p: &LstmParams<S>,
    seq: &[S],
    inner: Activation,
) -> Result<(Vec<S>, Vec<StepCache<S>>)> {
    if p.input == 0 || !seq.len().is_multiple_of(p.input) || seq.is_empty() {
        return Err(Error::Shape(format!(
            "sequence of {} values is not a whole number of {}-wide steps",
            seq.len(),
            p.input
        )));
    }
    let mut state = LstmState::zeros(p.hidden);
    let mut caches = Vec::with_capacity(seq.len() / p.input);
    for x in seq.chunks_exact(p.input) {
        let (next, cache) = step_cached(p, &state, x, inner)?;
        caches.push(cache);
        state = next;
    }
    Ok((state.h, caches))
}

/// Backpropagation through time from `dh` on the last hidden state.
/// Returns parameter gradients (same layout as [`LstmParams`]) and the
/// gradient for the input sequence.
pub fn lstm_backward<S: Scalar>(
    p: &LstmParams<S>,
    caches: &[StepCache<S>],
    dh_last: &[S],
    inner: Activation,
) -> (LstmParams<S>, Vec<S>) {
    let hid = p.hidden;
    let mut grads = LstmParams::zeros(hid, p.input);
    let mut dx = vec![S::zero(); caches.len() * p.input];
    let mut dh = dh_last.to_vec();
    let mut dc = vec![S::zero(); hid];
    for (t, cache) in caches.iter().enumerate().rev() {
        let [f, i, g, o] = &cache.gates;
        let mut da: [Vec<S>; 4] = Default::default();
        da[OUTPUT] = (0..hid)
            .map(|k| dh[k] * cache.phi_c[k] * o[k] * (S::one() - o[k]))
            .collect();
        for k in 0..hid {
            dc[k] += dh[k] * o[k] * inner.scalar_grad(cache.c[k], cache.phi_c[k]);
        }
        da[FORGET] = (0..hid)
            .map(|k| dc[k] * cache.c_prev[k] * f[k] * (S::one() - f[k]))
            .collect();
        da[INPUT] = (0..hid)
            .map(|k| dc[k] * g[k] * i[k] * (S::one() - i[k]))
            .collect();
        // relu'(a) = [g > 0] and tanh'(a) = 1 - g², both through the output g.
        da[CANDIDATE] = (0..hid)
            .map(|k| dc[k] * i[k] * inner.scalar_grad(g[k], g[k]))
            .collect();
        let mut dz = vec![S::zero(); hid + p.input];
        #[allow(clippy::needless_range_loop)]
        for gate in 0..4 {
            let (dw, db, dzg) = dense_backward(&p.w[gate], &cache.z, &da[gate]);
            for (a, b) in grads.w[gate].iter_mut().zip(dw) {
                *a += b;
            }
            for (a, b) in grads.b[gate].iter_mut().zip(db) {
                *a += b;
            }
            for (a, b) in dz.iter_mut().zip(dzg) {
                *a += b;
            }
        }
        dx[t * p.input..(t + 1) * p.input].copy_from_slice(&dz[hid..]);
        dh = dz[..hid].to_vec();
        dc = (0..hid).map(|k| dc[k] * f[k]).collect();
    }
    (grads, dx)
}
