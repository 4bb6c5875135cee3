//! Class-imbalance treatments.
//!
//! The fraud class (label 1) is treated as the minority throughout. Ratios
//! follow two conventions: under-samplers take `majority / minority`,
//! SMOTE takes `minority / majority` after resampling. Target counts use
//! `round` (half away from zero).
//!
//! Neighbor searches are exact Euclidean scans; equal distances are ordered
//! by row index so results do not depend on evaluation order.

use std::cmp::Ordering;
use std::fmt;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Dataset;
use crate::scalar::Scalar;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerMethod {
    None,
    Rus,
    Nearmiss,
    Smote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NearMissVersion {
    V1,
    V2,
    V3,
}

impl TryFrom<u8> for NearMissVersion {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            1 => Ok(Self::V1),
            2 => Ok(Self::V2),
            3 => Ok(Self::V3),
            _ => Err(Error::InvalidArgument(format!("NearMiss version {v} not in 1..=3"))),
        }
    }
}

/// Resampling configuration for one grid entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    pub method: SamplerMethod,
    #[serde(default = "default_version")]
    pub nearmiss_version: u8,
    /// Neighbor count; defaults to 3 for NearMiss and 5 for SMOTE.
    #[serde(default)]
    pub k_neighbors: Option<usize>,
    #[serde(default = "default_ratio")]
    pub ratio: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_version() -> u8 {
    1
}

fn default_ratio() -> f64 {
    1.0
}

impl SamplerConfig {
    pub fn none() -> Self {
        Self::new(SamplerMethod::None, 1.0)
    }

    pub fn new(method: SamplerMethod, ratio: f64) -> Self {
        Self {
            method,
            nearmiss_version: 1,
            k_neighbors: None,
            ratio,
            seed: 0,
        }
    }

    pub fn k(&self) -> usize {
        self.k_neighbors.unwrap_or(match self.method {
            SamplerMethod::Smote => 5,
            _ => 3,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ratio.is_finite() && self.ratio > 0.0) {
            return Err(Error::Config(format!("sampler ratio {} must be > 0", self.ratio)));
        }
        match self.method {
            SamplerMethod::Rus | SamplerMethod::Nearmiss if self.ratio < 1.0 => Err(
                Error::Config(format!("under-sampling ratio {} must be ≥ 1", self.ratio)),
            ),
            SamplerMethod::Smote if self.ratio > 1.0 => Err(Error::Config(format!(
                "SMOTE ratio {} must be in (0,1]",
                self.ratio
            ))),
            SamplerMethod::Nearmiss => NearMissVersion::try_from(self.nearmiss_version).map(|_| ()),
            _ => Ok(()),
        }
    }

    /// Applies the configured sampler. `seed` overrides the stored seed.
    pub fn apply<S: Scalar>(&self, ds: &Dataset<S>, seed: u64) -> Result<Dataset<S>> {
        self.validate()?;
        match self.method {
            SamplerMethod::None => Ok(ds.clone()),
            SamplerMethod::Rus => rus(ds, self.ratio, seed),
            SamplerMethod::Nearmiss => nearmiss(
                ds,
                NearMissVersion::try_from(self.nearmiss_version)?,
                self.k(),
                self.ratio,
            ),
            SamplerMethod::Smote => smote(ds, self.ratio, self.k(), seed).map(|(d, _)| d),
        }
    }
}

impl fmt::Display for SamplerConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.method {
            SamplerMethod::None => write!(f, "none"),
            SamplerMethod::Rus => write!(f, "rus"),
            SamplerMethod::Nearmiss => write!(f, "nearmiss{}", self.nearmiss_version),
            SamplerMethod::Smote => write!(f, "smote"),
        }
    }
}

/// `round(ratio · count)`, half away from zero.
pub fn target_count(ratio: f64, count: usize) -> usize {
    (ratio * count as f64).round() as usize
}

/// Random under-sampling: all minority rows plus `round(ratio · n_pos)`
/// majority rows drawn uniformly, returned in shuffled order.
pub fn rus<S: Scalar>(ds: &Dataset<S>, ratio: f64, seed: u64) -> Result<Dataset<S>> {
    let n_pos = ds.n_pos();
    if n_pos == 0 {
        return Err(Error::Sampler("no minority rows".into()));
    }
    let target = target_count(ratio, n_pos);
    let mut neg = ds.indices_of(0);
    if target > neg.len() {
        return Err(Error::Sampler(format!(
            "ratio {ratio} needs {target} majority rows, only {} available",
            neg.len()
        )));
    }
    let mut rng = seed::rng(seed);
    neg.shuffle(&mut rng);
    let mut idx = ds.indices_of(1);
    idx.extend_from_slice(&neg[..target]);
    idx.shuffle(&mut rng);
    Ok(ds.select(&idx))
}

pub(crate) fn euclidean<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum::<S>()
        .sqrt()
}

fn by_distance<S: Scalar>(a: &(S, usize), b: &(S, usize)) -> Ordering {
    a.0.partial_cmp(&b.0)
        .unwrap_or(Ordering::Equal)
        .then(a.1.cmp(&b.1))
}

/// Distances from `x` to each of `candidates`, sorted ascending with index
/// tie-break, truncated to the `k` nearest.
fn k_nearest<S: Scalar>(ds: &Dataset<S>, x: &[S], candidates: &[usize], k: usize) -> Vec<(S, usize)> {
    let mut d: Vec<(S, usize)> = candidates
        .iter()
        .map(|&j| (euclidean(x, ds.row(j)), j))
        .collect();
    let k = k.min(d.len());
    if k < d.len() {
        d.select_nth_unstable_by(k, by_distance);
        d.truncate(k);
    }
    d.sort_by(by_distance);
    d
}

fn k_farthest<S: Scalar>(ds: &Dataset<S>, x: &[S], candidates: &[usize], k: usize) -> Vec<(S, usize)> {
    let mut d: Vec<(S, usize)> = candidates
        .iter()
        .map(|&j| (euclidean(x, ds.row(j)), j))
        .collect();
    // Farthest first; among equal distances the lower index wins.
    d.sort_by(|a, b| by_distance(&(b.0, a.1), &(a.0, b.1)));
    d.truncate(k);
    // Sum in ascending order, matching the nearest-neighbour path.
    d.sort_by(by_distance);
    d
}

fn mean_distance<S: Scalar>(d: &[(S, usize)]) -> S {
    d.iter().map(|p| p.0).sum::<S>() / S::of_usize(d.len())
}

/// NearMiss under-sampling. Keeps every minority row and
/// `round(ratio · n_pos)` majority rows:
///
/// * v1: smallest mean distance to their `k` nearest minority rows;
/// * v2: smallest mean distance to their `k` farthest minority rows;
/// * v3: candidates are the `k` nearest majority rows of each minority row;
///   among them keep those with the largest mean distance to their `k`
///   nearest minority rows.
///
/// Ties go to the lower row index. Retained rows keep their source order.
pub fn nearmiss<S: Scalar>(
    ds: &Dataset<S>,
    version: NearMissVersion,
    k: usize,
    ratio: f64,
) -> Result<Dataset<S>> {
    let pos = ds.indices_of(1);
    let neg = ds.indices_of(0);
    if k == 0 {
        return Err(Error::Sampler("k must be ≥ 1".into()));
    }
    if pos.len() < k {
        return Err(Error::Sampler(format!(
            "NearMiss needs at least k={k} minority rows, have {}",
            pos.len()
        )));
    }
    let target = target_count(ratio, pos.len());
    if target > neg.len() {
        return Err(Error::Sampler(format!(
            "ratio {ratio} needs {target} majority rows, only {} available",
            neg.len()
        )));
    }

    let mut scored: Vec<(S, usize)> = match version {
        NearMissVersion::V1 => neg
            .iter()
            .map(|&i| (mean_distance(&k_nearest(ds, ds.row(i), &pos, k)), i))
            .collect(),
        NearMissVersion::V2 => neg
            .iter()
            .map(|&i| (mean_distance(&k_farthest(ds, ds.row(i), &pos, k)), i))
            .collect(),
        NearMissVersion::V3 => {
            let mut candidates: Vec<usize> = pos
                .iter()
                .flat_map(|&p| k_nearest(ds, ds.row(p), &neg, k).into_iter().map(|(_, j)| j))
                .collect();
            candidates.sort_unstable();
            candidates.dedup();
            if candidates.len() < target {
                return Err(Error::Sampler(format!(
                    "NearMiss-3 candidate pool has {} rows, target is {target}",
                    candidates.len()
                )));
            }
            // Negate so that the ascending sort below ranks largest first.
            candidates
                .iter()
                .map(|&i| (-mean_distance(&k_nearest(ds, ds.row(i), &pos, k)), i))
                .collect()
        }
    };
    scored.sort_by(by_distance);
    let mut keep: Vec<usize> = scored[..target].iter().map(|p| p.1).collect();
    keep.extend_from_slice(&pos);
    keep.sort_unstable();
    Ok(ds.select(&keep))
}

/// Parents and interpolation weight of one synthetic SMOTE row, as indices
/// into the input dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoteOrigin {
    pub base: usize,
    pub neighbor: usize,
    pub lambda: f64,
}

/// `x + λ (n − x)`.
pub fn interpolate<S: Scalar>(x: &[S], n: &[S], lambda: S) -> Vec<S> {
    x.iter().zip(n).map(|(&a, &b)| a + lambda * (b - a)).collect()
}

/// SMOTE over-sampling to `round(ratio · n_neg)` minority rows. Input rows
/// are returned unchanged and in order, synthetic rows are appended.
pub fn smote<S: Scalar>(
    ds: &Dataset<S>,
    ratio: f64,
    k: usize,
    seed: u64,
) -> Result<(Dataset<S>, Vec<SmoteOrigin>)> {
    let pos = ds.indices_of(1);
    if pos.len() < 2 {
        return Err(Error::Sampler(format!(
            "SMOTE needs at least 2 minority rows, have {}",
            pos.len()
        )));
    }
    if k == 0 || k >= pos.len() {
        return Err(Error::Sampler(format!(
            "k={k} must be in 1..{} (minority rows − 1)",
            pos.len()
        )));
    }
    let target = target_count(ratio, ds.n_neg());
    if target < pos.len() {
        return Err(Error::Sampler(format!(
            "ratio {ratio} gives {target} minority rows, fewer than the {} present",
            pos.len()
        )));
    }
    let n_new = target - pos.len();
    let neighbors: Vec<Vec<usize>> = pos
        .iter()
        .map(|&i| {
            let others: Vec<usize> = pos.iter().copied().filter(|&j| j != i).collect();
            k_nearest(ds, ds.row(i), &others, k)
                .into_iter()
                .map(|(_, j)| j)
                .collect()
        })
        .collect();

    let mut rng = seed::rng(seed);
    let mut features = Vec::with_capacity(n_new * ds.n_features());
    let mut origins = Vec::with_capacity(n_new);
    for _ in 0..n_new {
        let b = rng.random_range(0..pos.len());
        let nn = neighbors[b][rng.random_range(0..k)];
        let lambda: f64 = rng.random();
        let base = pos[b];
        features.extend(interpolate(ds.row(base), ds.row(nn), S::of(lambda)));
        origins.push(SmoteOrigin {
            base,
            neighbor: nn,
            lambda,
        });
    }
    let out = ds.with_appended(&features, &vec![1; n_new])?;
    Ok((out, origins))
}

/// Audit log: one line per synthetic row with parent indices and λ.
pub fn write_provenance(path: &Path, origins: &[SmoteOrigin]) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut w = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    writeln!(w, "synthetic,base,neighbor,lambda").map_err(io)?;
    for (i, o) in origins.iter().enumerate() {
        writeln!(w, "{i},{},{},{}", o.base, o.neighbor, o.lambda).map_err(io)?;
    }
    w.flush().map_err(io)
}
