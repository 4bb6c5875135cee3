use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Dataset;
use crate::scalar::Scalar;
use crate::seed;

/// Two unit-variance Gaussian clusters whose means lie `separation` apart
/// along a random direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_rows: usize,
    pub n_features: usize,
    pub fraud_fraction: f64,
    #[serde(default = "default_separation")]
    pub separation: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_separation() -> f64 {
    2.0
}

impl SyntheticSpec {
    pub fn new(n_rows: usize, n_features: usize, fraud_fraction: f64, separation: f64, seed: u64) -> Self {
        Self {
            n_rows,
            n_features,
            fraud_fraction,
            separation,
            seed,
        }
    }

    /// Shapes of the three card datasets: `ecd` (30 features, 0.172% fraud),
    /// `scd` (11 features, 14.6%) and `tcd` (7 features, 5.6%).
    pub fn preset(name: &str, n_rows: usize, seed: u64) -> Option<Self> {
        let (d, frac) = match name {
            "ecd" => (30, 0.00172),
            "scd" => (11, 0.146),
            "tcd" => (7, 0.056),
            _ => return None,
        };
        Some(Self::new(n_rows, d, frac, default_separation(), seed))
    }

    pub fn n_pos(&self) -> usize {
        (self.n_rows as f64 * self.fraud_fraction).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fraud_fraction > 0.0 && self.fraud_fraction < 1.0) {
            return Err(Error::Config(format!(
                "fraud_fraction {} outside (0,1)",
                self.fraud_fraction
            )));
        }
        if !(self.separation >= 0.0 && self.separation.is_finite()) {
            return Err(Error::Config(format!("separation {} must be ≥ 0", self.separation)));
        }
        if self.n_features == 0 || self.n_rows == 0 {
            return Err(Error::Config("synthetic data needs rows and features".into()));
        }
        let p = self.n_pos();
        if p == 0 || p == self.n_rows {
            return Err(Error::Config(format!(
                "{} rows at fraction {} leave a class empty",
                self.n_rows, self.fraud_fraction
            )));
        }
        Ok(())
    }
}

pub fn feature_names(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("x{i}")).collect()
}

/// Samples the dataset. The positive count is `round(n_rows · fraud_fraction)`
/// and positives are scattered over random row positions.
pub fn gen_synthetic<S: Scalar>(spec: &SyntheticSpec) -> Result<Dataset<S>> {
    spec.validate()?;
    let d = spec.n_features;
    let mut rng = seed::rng(spec.seed);
    let mut dir: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        dir.iter_mut().for_each(|v| *v /= norm);
    } else {
        dir[0] = 1.0;
    }
    let mut labels = vec![0u8; spec.n_rows];
    labels[..spec.n_pos()].fill(1);
    labels.shuffle(&mut rng);
    let mut features = Vec::with_capacity(spec.n_rows * d);
    for &y in &labels {
        for &u in &dir {
            let z: f64 = rng.sample(StandardNormal);
            let shift = if y == 1 { spec.separation * u } else { 0.0 };
            features.push(S::of(z + shift));
        }
    }
    Dataset::new(feature_names(d), features, labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn positive_count() {
        let s = SyntheticSpec::new(284807, 2, 0.00172, 2.0, 0);
        assert_eq!(s.n_pos(), 490);
        let ds: Dataset<f64> = gen_synthetic(&SyntheticSpec::new(1000, 3, 0.1, 1.0, 4)).unwrap();
        assert_eq!(ds.n_pos(), 100);
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let a: Dataset<f64> = gen_synthetic(&SyntheticSpec::new(200, 4, 0.2, 3.0, 1)).unwrap();
        let b: Dataset<f64> = gen_synthetic(&SyntheticSpec::new(200, 4, 0.2, 3.0, 1)).unwrap();
        let c: Dataset<f64> = gen_synthetic(&SyntheticSpec::new(200, 4, 0.2, 3.0, 2)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn class_means_are_separated() {
        let spec = SyntheticSpec::new(20000, 5, 0.5, 4.0, 8);
        let ds: Dataset<f64> = gen_synthetic(&spec).unwrap();
        let mut mean = [vec![0.0; 5], vec![0.0; 5]];
        for i in 0..ds.n_rows() {
            let y = ds.label(i) as usize;
            for (m, v) in mean[y].iter_mut().zip(ds.row(i)) {
                *m += v / 10000.0;
            }
        }
        let dist = mean[0].iter().zip(&mean[1]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!((dist - 4.0).abs() < 0.1, "{dist}");
    }

    #[test]
    fn degenerate_specs() {
        for s in [
            SyntheticSpec::new(100, 2, 0.0, 1.0, 0),
            SyntheticSpec::new(100, 2, 1.0, 1.0, 0),
            SyntheticSpec::new(100, 2, 0.1, -1.0, 0),
            SyntheticSpec::new(100, 0, 0.1, 1.0, 0),
            SyntheticSpec::new(10, 2, 0.01, 1.0, 0),
        ] {
            assert!(gen_synthetic::<f64>(&s).is_err());
        }
    }
}
