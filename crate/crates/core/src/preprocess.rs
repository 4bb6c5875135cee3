//! Standard scaling, Pearson correlation and the test/train/validation split.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Dataset;
use crate::scalar::Scalar;
use crate::seed;

/// Per-feature mean and population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ScalerParams<S: Scalar> {
    pub mean: Vec<S>,
    pub std: Vec<S>,
}

impl<S: Scalar> ScalerParams<S> {
    pub fn width(&self) -> usize {
        self.mean.len()
    }

    /// Standardizes one row in place. Zero-variance features become 0.
    pub fn transform_row(&self, row: &mut [S]) {
        for ((v, &m), &s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
            *v = if s > S::zero() { (*v - m) / s } else { S::zero() };
        }
    }
}

pub fn fit_scaler<S: Scalar>(ds: &Dataset<S>) -> Result<ScalerParams<S>> {
    let all: Vec<usize> = (0..ds.n_rows()).collect();
    fit_scaler_rows(ds, &all)
}

/// Fits on the listed rows only.
pub fn fit_scaler_rows<S: Scalar>(ds: &Dataset<S>, rows: &[usize]) -> Result<ScalerParams<S>> {
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let d = ds.n_features();
    let n = S::of_usize(rows.len());
    let mut mean = vec![S::zero(); d];
    for &i in rows {
        for (m, &v) in mean.iter_mut().zip(ds.row(i)) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![S::zero(); d];
    for &i in rows {
        for ((s, &v), &m) in var.iter_mut().zip(ds.row(i)).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let std = var.into_iter().map(|s| (s / n).sqrt()).collect();
    Ok(ScalerParams { mean, std })
}

pub fn apply_scaler<S: Scalar>(ds: &Dataset<S>, p: &ScalerParams<S>) -> Result<Dataset<S>> {
    if p.width() != ds.n_features() {
        return Err(Error::Shape(format!(
            "scaler fitted on {} features, dataset has {}",
            p.width(),
            ds.n_features()
        )));
    }
    let mut features = ds.features().to_vec();
    if p.width() > 0 {
        for row in features.chunks_exact_mut(p.width()) {
            p.transform_row(row);
        }
    }
    ds.with_features(features)
}

/// Pearson correlation matrix with column names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct CorrelationMatrix<S: Scalar> {
    pub names: Vec<String>,
    /// Row-major `names.len()²` coefficients.
    pub values: Vec<S>,
    /// Columns with zero variance; their off-diagonal entries are 0.
    pub zero_variance: Vec<bool>,
}

impl<S: Scalar> CorrelationMatrix<S> {
    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn get(&self, i: usize, j: usize) -> S {
        self.values[i * self.dim() + j]
    }

    pub fn has_warnings(&self) -> bool {
        self.zero_variance.iter().any(|&z| z)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("feature");
        for n in &self.names {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        for (i, n) in self.names.iter().enumerate() {
            out.push_str(n);
            for j in 0..self.dim() {
                let _ = write!(out, ",{}", self.get(i, j));
            }
            out.push('\n');
        }
        out
    }

    /// Heatmap with a diverging color scale linear in [-1, 1].
    pub fn to_svg(&self) -> String {
        let d = self.dim();
        let cell = 28.0;
        let left = 180.0;
        let top = 180.0;
        let size = left + cell * d as f64 + 20.0;
        let mut svg = format!(
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#
        );
        svg.push_str(r#"<rect width="100%" height="100%" fill="white"/>"#);
        for (i, name) in self.names.iter().enumerate() {
            let y = top + cell * (i as f64 + 0.5);
            let x = left + cell * (i as f64 + 0.5);
            let _ = write!(
                svg,
                r#"<text x="{}" y="{y}" font-family="sans-serif" font-size="10" text-anchor="end" dominant-baseline="middle">{}</text>"#,
                left - 4.0,
                xml_escape(name)
            );
            let _ = write!(
                svg,
                r#"<text x="{x}" y="{}" font-family="sans-serif" font-size="10" transform="rotate(-60 {x} {})">{}</text>"#,
                top - 4.0,
                top - 4.0,
                xml_escape(name)
            );
        }
        for i in 0..d {
            for j in 0..d {
                let v = self.get(i, j).as_f64();
                let _ = write!(
                    svg,
                    r#"<rect class="cell" x="{}" y="{}" width="{cell}" height="{cell}" fill="{}"><title>{:.3}</title></rect>"#,
                    left + cell * j as f64,
                    top + cell * i as f64,
                    diverging_color(v),
                    v
                );
            }
        }
        svg.push_str("</svg>\n");
        svg
    }

    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let csv = dir.join(format!("{stem}.csv"));
        std::fs::write(&csv, self.to_csv()).map_err(|e| Error::io(&csv, e))?;
        let svg = dir.join(format!("{stem}.svg"));
        std::fs::write(&svg, self.to_svg()).map_err(|e| Error::io(&svg, e))
    }
}

pub(crate) fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Blue at -1, white at 0, red at +1.
fn diverging_color(v: f64) -> String {
    let t = v.clamp(-1.0, 1.0);
    let (r, g, b) = if t >= 0.0 {
        (255.0, 255.0 * (1.0 - t), 255.0 * (1.0 - t))
    } else {
        (255.0 * (1.0 + t), 255.0 * (1.0 + t), 255.0)
    };
    format!("rgb({},{},{})", r.round(), g.round(), b.round())
}

pub fn correlation_matrix<S: Scalar>(
    ds: &Dataset<S>,
    include_label: bool,
) -> Result<CorrelationMatrix<S>> {
    let n = ds.n_rows();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "correlation needs at least 2 rows, got {n}"
        )));
    }
    let mut names = ds.feature_names();
    let mut cols: Vec<Vec<S>> = (0..ds.n_features()).map(|j| ds.column(j)).collect();
    if include_label {
        names.push(ds.label_schema().name.clone());
        cols.push(ds.labels().iter().map(|&y| S::of(f64::from(y))).collect());
    }
    let nn = S::of_usize(n);
    let centered: Vec<(Vec<S>, S)> = cols
        .into_iter()
        .map(|c| {
            let m = c.iter().copied().sum::<S>() / nn;
            let dev: Vec<S> = c.into_iter().map(|v| v - m).collect();
            let ss = dev.iter().map(|&v| v * v).sum::<S>().sqrt();
            (dev, ss)
        })
        .collect();
    let d = centered.len();
    let zero_variance: Vec<bool> = centered.iter().map(|(_, ss)| *ss == S::zero()).collect();
    if zero_variance.iter().any(|&z| z) {
        log::warn!("correlation: zero-variance columns reported as 0");
    }

    // Each entry depends only on its own pair of columns, so the parallel
    // schedule does not affect the result.
    let upper: Vec<Vec<S>> = (0..d)
        .into_par_iter()
        .map(|i| {
            (i..d)
                .map(|j| {
                    if i == j {
                        S::one()
                    } else if zero_variance[i] || zero_variance[j] {
                        S::zero()
                    } else {
                        let (a, sa) = &centered[i];
                        let (b, sb) = &centered[j];
                        let dot = a.iter().zip(b).map(|(&x, &y)| x * y).sum::<S>();
                        (dot / (*sa * *sb)).max(-S::one()).min(S::one())
                    }
                })
                .collect()
        })
        .collect();
    let mut values = vec![S::zero(); d * d];
    for (i, row) in upper.iter().enumerate() {
        for (off, &v) in row.iter().enumerate() {
            let j = i + off;
            values[i * d + j] = v;
            values[j * d + i] = v;
        }
    }
    Ok(CorrelationMatrix {
        names,
        values,
        zero_variance,
    })
}

/// Index sets for the three partitions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub test: Vec<usize>,
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub test_frac: f64,
    pub val_frac: f64,
    /// Split each class separately so every partition keeps the class mix.
    pub stratified: bool,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            test_frac: 0.035,
            val_frac: 0.2,
            stratified: false,
        }
    }
}

impl SplitConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, f) in [("test_frac", self.test_frac), ("val_frac", self.val_frac)] {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::InvalidArgument(format!("{name}={f} outside (0,1)")));
            }
        }
        Ok(())
    }
}

/// Partition sizes for `n` rows: `(test, validation, train)`.
pub fn split_sizes(n: usize, test_frac: f64, val_frac: f64) -> (usize, usize, usize) {
    let test = (test_frac * n as f64).floor() as usize;
    let rest = n - test;
    let val = (val_frac * rest as f64).floor() as usize;
    (test, val, rest - val)
}

/// Random split: shuffle `0..n` under `seed`, the first `floor(test_frac·n)`
/// go to test, `floor(val_frac·m)` of the remaining `m` to validation and
/// the rest to training.
pub fn split<S: Scalar>(ds: &Dataset<S>, cfg: SplitConfig, seed: u64) -> Result<SplitIndices> {
    let n = ds.n_rows();
    cfg.validate()?;
    if n < 3 {
        return Err(Error::InvalidArgument(format!("split needs at least 3 rows, got {n}")));
    }
    let mut rng = seed::rng(seed);
    let (mut test, mut validation, mut train) = (Vec::new(), Vec::new(), Vec::new());
    if cfg.stratified {
        for label in [1u8, 0] {
            let mut idx = ds.indices_of(label);
            idx.shuffle(&mut rng);
            let (t, v, _) = split_sizes(idx.len(), cfg.test_frac, cfg.val_frac);
            test.extend_from_slice(&idx[..t]);
            validation.extend_from_slice(&idx[t..t + v]);
            train.extend_from_slice(&idx[t + v..]);
        }
    } else {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng);
        let (t, v, _) = split_sizes(n, cfg.test_frac, cfg.val_frac);
        test.extend_from_slice(&idx[..t]);
        validation.extend_from_slice(&idx[t..t + v]);
        train.extend_from_slice(&idx[t + v..]);
    }
    if test.is_empty() || validation.is_empty() || train.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "{n} rows too few for non-empty partitions ({} test, {} validation, {} train)",
            test.len(),
            validation.len(),
            train.len()
        )));
    }
    Ok(SplitIndices {
        test,
        train,
        validation,
        seed,
    })
}
