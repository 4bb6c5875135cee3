//! Confusion-matrix metrics for the binary fraud task (fraud = positive).

use std::fmt;

use serde::de::{self, Deserializer};
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }

    /// The same predictions read with the negative class as positive.
    pub fn swapped(&self) -> Self {
        Self {
            tp: self.tn,
            tn: self.tp,
            fp: self.fn_,
            fn_: self.fp,
        }
    }
}

/// A ratio that may be undefined (0/0). Serialized as a number or the
/// string `"undef"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Score {
    Defined(f64),
    Undefined,
}

impl Score {
    pub fn value(self) -> Option<f64> {
        match self {
            Score::Defined(v) => Some(v),
            Score::Undefined => None,
        }
    }

    pub fn is_defined(self) -> bool {
        matches!(self, Score::Defined(_))
    }

    fn ratio(num: usize, den: usize) -> Self {
        if den == 0 {
            Score::Undefined
        } else {
            Score::Defined(num as f64 / den as f64)
        }
    }
}

impl fmt::Display for Score {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Score::Defined(v) => write!(f, "{v}"),
            Score::Undefined => f.write_str("undef"),
        }
    }
}

impl Serialize for Score {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Score::Defined(v) => s.serialize_f64(*v),
            Score::Undefined => s.serialize_str("undef"),
        }
    }
}

impl<'de> Deserialize<'de> for Score {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Score::Defined(v)),
            Raw::Str(s) if s == "undef" => Ok(Score::Undefined),
            Raw::Str(s) => Err(de::Error::custom(format!("expected number or \"undef\", got {s:?}"))),
        }
    }
}

/// Accuracy, precision, recall and F1 with support counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub accuracy: f64,
    pub precision: Score,
    pub recall: Score,
    pub f1: Score,
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub support_pos: usize,
    pub support_neg: usize,
}

pub fn confusion(y_true: &[u8], y_pred: &[u8]) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::Shape(format!(
            "{} true labels vs {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    if y_true.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut cm = ConfusionMatrix::default();
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t, p) {
            (1, 1) => cm.tp += 1,
            (0, 0) => cm.tn += 1,
            (0, 1) => cm.fp += 1,
            (1, 0) => cm.fn_ += 1,
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "non-binary label pair ({t}, {p})"
                )))
            }
        }
    }
    Ok(cm)
}

/// Accuracy = (tn+tp)/total, precision = tp/(tp+fp), recall = tp/(tp+fn),
/// F1 = harmonic mean of precision and recall.
///
/// Precision and recall are undefined on a zero denominator and F1 is
/// undefined whenever either of them is. When both are defined and zero,
/// F1 takes its limit value 0.
pub fn metrics(cm: &ConfusionMatrix) -> Result<MetricReport> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::EmptyDataset);
    }
    let precision = Score::ratio(cm.tp, cm.tp + cm.fp);
    let recall = Score::ratio(cm.tp, cm.tp + cm.fn_);
    let f1 = match (precision, recall) {
        (Score::Defined(p), Score::Defined(r)) if p + r == 0.0 => Score::Defined(0.0),
        (Score::Defined(p), Score::Defined(r)) => Score::Defined(2.0 * p * r / (p + r)),
        _ => Score::Undefined,
    };
    Ok(MetricReport {
        accuracy: (cm.tn + cm.tp) as f64 / total as f64,
        precision,
        recall,
        f1,
        tp: cm.tp,
        tn: cm.tn,
        fp: cm.fp,
        fn_: cm.fn_,
        support_pos: cm.tp + cm.fn_,
        support_neg: cm.tn + cm.fp,
    })
}

pub fn evaluate(y_true: &[u8], y_pred: &[u8]) -> Result<MetricReport> {
    metrics(&confusion(y_true, y_pred)?)
}
