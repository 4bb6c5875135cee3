//! Brute-force references for metrics and samplers.

use cardfraud::metrics::{evaluate, MetricReport, Score};
use cardfraud::resample::{self, NearMissVersion, SmoteOrigin};
use cardfraud::{seed, Dataset};
use rand::Rng;

/// Counts and ratios computed directly from the label vectors.
pub struct Counted {
    pub accuracy: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

pub fn count_metrics(y: &[u8], p: &[u8]) -> Counted {
    let (mut tp, mut tn, mut fp, mut fn_) = (0usize, 0usize, 0usize, 0usize);
    for i in 0..y.len() {
        if y[i] == 1 && p[i] == 1 {
            tp += 1;
        } else if y[i] == 0 && p[i] == 0 {
            tn += 1;
        } else if p[i] == 1 {
            fp += 1;
        } else {
            fn_ += 1;
        }
    }
    let precision = (tp + fp > 0).then(|| tp as f64 / (tp + fp) as f64);
    let recall = (tp + fn_ > 0).then(|| tp as f64 / (tp + fn_) as f64);
    let f1 = match (precision, recall) {
        (Some(a), Some(b)) if a + b > 0.0 => Some(2.0 * a * b / (a + b)),
        (Some(_), Some(_)) => Some(0.0),
        _ => None,
    };
    Counted {
        accuracy: (tp + tn) as f64 / y.len() as f64,
        precision,
        recall,
        f1,
    }
}

fn close(a: Score, b: Option<f64>, tol: f64) -> bool {
    match (a.value(), b) {
        (Some(x), Some(y)) => (x - y).abs() <= tol,
        (None, None) => true,
        _ => false,
    }
}

pub fn report_matches(r: &MetricReport, c: &Counted, tol: f64) -> bool {
    (r.accuracy - c.accuracy).abs() <= tol
        && close(r.precision, c.precision, tol)
        && close(r.recall, c.recall, tol)
        && close(r.f1, c.f1, tol)
}

/// Compares the library against counting on `trials` random label vectors
/// and returns the number of mismatches.
pub fn metric_mismatches(trials: usize, seed: u64) -> usize {
    let mut rng = seed::rng(seed);
    let mut bad = 0;
    for _ in 0..trials {
        let n = rng.random_range(1..=64);
        let (pt, pp) = (rng.random::<f64>(), rng.random::<f64>());
        let y: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<f64>() < pt)).collect();
        let p: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<f64>() < pp)).collect();
        let r = evaluate(&y, &p).expect("evaluate");
        if !report_matches(&r, &count_metrics(&y, &p), 1e-12) {
            bad += 1;
        }
    }
    bad
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn sorted_distances(ds: &Dataset, from: usize, to: &[usize]) -> Vec<f64> {
    let mut d: Vec<f64> = to.iter().map(|&j| dist(ds.row(from), ds.row(j))).collect();
    d.sort_by(f64::total_cmp);
    d
}

fn for_each_subset(n: usize, size: usize, f: &mut dyn FnMut(&[usize])) {
    fn rec(start: usize, n: usize, size: usize, cur: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if cur.len() == size {
            f(cur);
            return;
        }
        for i in start..=n - (size - cur.len()) {
            cur.push(i);
            rec(i + 1, n, size, cur, f);
            cur.pop();
        }
    }
    rec(0, n, size, &mut Vec::with_capacity(size), f);
}

/// Majority rows kept by NearMiss-1, found by scoring every subset of the
/// target size. The smallest total mean distance wins, ties go to the
/// lexicographically smallest index set.
pub fn nearmiss1_exhaustive(ds: &Dataset, k: usize, target: usize) -> Vec<usize> {
    let pos = ds.indices_of(1);
    let neg = ds.indices_of(0);
    let score: Vec<f64> = neg
        .iter()
        .map(|&i| sorted_distances(ds, i, &pos)[..k].iter().sum::<f64>() / k as f64)
        .collect();
    let mut best: Option<(f64, Vec<usize>)> = None;
    for_each_subset(neg.len(), target, &mut |sub| {
        let mut s: Vec<f64> = sub.iter().map(|&i| score[i]).collect();
        s.sort_by(f64::total_cmp);
        let total: f64 = s.iter().sum();
        let better = match &best {
            None => true,
            Some((t, _)) => total < *t,
        };
        if better {
            best = Some((total, sub.to_vec()));
        }
    });
    best.map(|(_, s)| s.iter().map(|&i| neg[i]).collect()).unwrap_or_default()
}

/// Small dataset on an integer grid so equal distances are common.
pub fn grid_dataset(n_pos: usize, n_neg: usize, rng: &mut seed::Rng) -> Dataset {
    let n = n_pos + n_neg;
    let features: Vec<f64> = (0..2 * n).map(|_| f64::from(rng.random_range(0..4u8))).collect();
    let mut labels = vec![1u8; n_pos];
    labels.extend(vec![0u8; n_neg]);
    // Interleave the classes so index order is not class order.
    for i in (1..n).rev() {
        labels.swap(i, rng.random_range(0..=i));
    }
    Dataset::new(vec!["a".into(), "b".into()], features, labels).unwrap()
}

/// Runs `instances` random NearMiss-1 problems with at most 12 majority
/// rows and returns how many disagree with enumeration.
pub fn nearmiss_mismatches(instances: usize, seed: u64) -> usize {
    let mut rng = seed::rng(seed);
    let mut bad = 0;
    for _ in 0..instances {
        let n_pos = rng.random_range(1..=5);
        let n_neg = rng.random_range(1..=12);
        let ds = grid_dataset(n_pos, n_neg, &mut rng);
        let k = rng.random_range(1..=n_pos.min(3));
        let target = rng.random_range(1..=n_neg);
        let ratio = target as f64 / n_pos as f64;
        let out = resample::nearmiss(&ds, NearMissVersion::V1, k, ratio).expect("nearmiss");
        let kept: Vec<usize> = (0..out.n_rows())
            .filter(|&i| out.label(i) == 0)
            .map(|i| out.row_ids()[i].unwrap())
            .collect();
        if kept != nearmiss1_exhaustive(&ds, k, target) {
            bad += 1;
        }
    }
    bad
}

/// Checks one synthetic row against its recorded parents: both parents
/// are minority rows, the neighbor is among the base's `k` nearest
/// minority rows, λ ∈ [0,1), and the row lies on the segment.
pub fn on_segment(ds: &Dataset, row: &[f64], o: &SmoteOrigin, k: usize) -> bool {
    if ds.label(o.base) != 1 || ds.label(o.neighbor) != 1 || o.base == o.neighbor {
        return false;
    }
    if !(0.0..1.0).contains(&o.lambda) {
        return false;
    }
    let others: Vec<usize> = ds.indices_of(1).into_iter().filter(|&j| j != o.base).collect();
    let kth = sorted_distances(ds, o.base, &others)[k - 1];
    if dist(ds.row(o.base), ds.row(o.neighbor)) > kth {
        return false;
    }
    let (x, n) = (ds.row(o.base), ds.row(o.neighbor));
    row.iter().enumerate().all(|(d, &v)| {
        let (lo, hi) = (x[d].min(n[d]), x[d].max(n[d]));
        let expect = x[d] + o.lambda * (n[d] - x[d]);
        v >= lo - 1e-12 && v <= hi + 1e-12 && (v - expect).abs() <= 1e-12 * (1.0 + expect.abs())
    })
}

/// SMOTE on random imbalanced data; returns the number of synthetic rows
/// failing [`on_segment`] and the total synthesized.
pub fn smote_failures(instances: usize, seed: u64) -> (usize, usize) {
    let mut rng = seed::rng(seed);
    let (mut bad, mut total) = (0, 0);
    for _ in 0..instances {
        let n_pos = rng.random_range(3..=15);
        let n_neg = rng.random_range(n_pos..=60);
        let d = rng.random_range(1..=5);
        let n = n_pos + n_neg;
        let features: Vec<f64> = (0..n * d).map(|_| rng.random::<f64>() * 10.0 - 5.0).collect();
        let mut labels = vec![1u8; n_pos];
        labels.extend(vec![0u8; n_neg]);
        for i in (1..n).rev() {
            labels.swap(i, rng.random_range(0..=i));
        }
        let names = (0..d).map(|j| format!("f{j}")).collect();
        let ds = Dataset::new(names, features, labels).unwrap();
        let k = rng.random_range(1..n_pos);
        let (out, origins) = resample::smote(&ds, 1.0, k, rng.random()).expect("smote");
        total += origins.len();
        for (j, o) in origins.iter().enumerate() {
            if !on_segment(&ds, out.row(n + j), o, k) {
                bad += 1;
            }
        }
    }
    (bad, total)
}

/// RUS over a grid of ratios and seeds; returns the failing cases.
pub fn rus_failures() -> Vec<(f64, u64)> {
    let mut rng = seed::rng(7);
    let n_pos = 40;
    let n_neg = 2000;
    let features: Vec<f64> = (0..(n_pos + n_neg) * 3).map(|_| rng.random()).collect();
    let mut labels = vec![1u8; n_pos];
    labels.extend(vec![0u8; n_neg]);
    for i in (1..labels.len()).rev() {
        labels.swap(i, rng.random_range(0..=i));
    }
    let ds = Dataset::new(vec!["a".into(), "b".into(), "c".into()], features, labels).unwrap();
    let ratios = [1.0, 1.5, 2.0, 3.3, 5.0, 10.0, 12.5, 25.0, 37.7, 50.0];
    let mut failed = Vec::new();
    for &ratio in &ratios {
        for seed in 0..5u64 {
            let out = resample::rus(&ds, ratio, seed).expect("rus");
            let want = (ratio * n_pos as f64).round() as usize;
            let minority_exact = (0..out.n_rows()).filter(|&i| out.label(i) == 1).all(|i| {
                let src = out.row_ids()[i].unwrap();
                ds.label(src) == 1 && out.row(i) == ds.row(src)
            });
            if out.n_pos() != n_pos || out.n_neg() != want || !minority_exact {
                failed.push((ratio, seed));
            }
        }
    }
    failed
}
