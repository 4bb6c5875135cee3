use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Adaptive-moment optimizer state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct OptimizerState<S: Scalar> {
    pub step: u64,
    pub lr: S,
    pub beta1: S,
    pub beta2: S,
    pub eps: S,
    m: Vec<Vec<S>>,
    v: Vec<Vec<S>>,
}

impl<S: Scalar> OptimizerState<S> {
    /// Defaults: decay rates 0.9 / 0.999, ε = 1e-8.
    pub fn new(lr: f64) -> Self {
        Self {
            step: 0,
            lr: S::of(lr),
            beta1: S::of(0.9),
            beta2: S::of(0.999),
            eps: S::of(1e-8),
            m: Vec::new(),
            v: Vec::new(),
        }
    }
}

impl<S: Scalar> Default for OptimizerState<S> {
    fn default() -> Self {
        Self::new(1e-3)
    }
}

/// One bias-corrected adaptive-moment update. Moment buffers are sized on
/// the first call.
pub fn adam_step<S: Scalar>(
    state: &mut OptimizerState<S>,
    params: &mut [&mut Vec<S>],
    grads: &[Vec<S>],
) -> Result<()> {
    if params.len() != grads.len()
        || params.iter().zip(grads).any(|(p, g)| p.len() != g.len())
    {
        return Err(Error::Shape("parameter and gradient shapes differ".into()));
    }
    if state.m.is_empty() {
        state.m = grads.iter().map(|g| vec![S::zero(); g.len()]).collect();
        state.v = state.m.clone();
    } else if state.m.len() != grads.len() || state.m.iter().zip(grads).any(|(m, g)| m.len() != g.len()) {
        return Err(Error::Shape("optimizer state does not match parameters".into()));
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = S::one() - b1.powi(t);
    let c2 = S::one() - b2.powi(t);
    for ((p, g), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        for i in 0..g.len() {
            m[i] = b1 * m[i] + (S::one() - b1) * g[i];
            v[i] = b2 * v[i] + (S::one() - b2) * g[i] * g[i];
            let mhat = m[i] / c1;
            let vhat = v[i] / c2;
            p[i] -= state.lr * mhat / (vhat.sqrt() + state.eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_keeps_parameters() {
        let mut st = OptimizerState::<f64>::default();
        let mut p = vec![1.0, -2.0];
        adam_step(&mut st, &mut [&mut p], &[vec![0.0, 0.0]]).unwrap();
        assert_eq!(p, vec![1.0, -2.0]);
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let mut st = OptimizerState::<f64>::default();
        let g = vec![0.3, -5.0, 1e-3];
        let mut p = vec![0.0; 3];
        adam_step(&mut st, &mut [&mut p], std::slice::from_ref(&g)).unwrap();
        // Bias-corrected first step: -lr · g / (|g| + ε).
        for (pi, gi) in p.iter().zip(&g) {
            let expected = -1e-3 * gi / (gi.abs() + 1e-8);
            assert!((pi - expected).abs() < 1e-15, "{pi} vs {expected}");
            assert!((pi.abs() - 1e-3).abs() < 1e-7);
        }
    }

    #[test]
    fn shape_mismatch() {
        let mut st = OptimizerState::<f64>::default();
        let mut p = vec![0.0; 2];
        assert!(adam_step(&mut st, &mut [&mut p], &[vec![0.0]]).is_err());
    }
}
