//! Dataset loading and cleaning.
//!
//! A [`Dataset`] is a row-major feature matrix plus a binary label vector
//! (0 = non-fraud, 1 = fraud). It is immutable once built; every stage of
//! the pipeline produces a new one.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    Categorical,
    Label,
    Drop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    Forbid,
    DropColumn,
    DropRow,
}

/// One column of a delimited input file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    pub kind: ColumnKind,
    #[serde(default = "default_missing", rename = "missing")]
    pub missing_policy: MissingPolicy,
    /// Categorical code book: the string at index `i` encodes to `i`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categories: Vec<String>,
    /// For the label column: the raw token meaning fraud. When unset the
    /// label must parse as 0 or 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positive: Option<String>,
    /// Missing cells observed while loading.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub n_missing: usize,
}

fn default_missing() -> MissingPolicy {
    MissingPolicy::DropRow
}

fn is_zero(n: &usize) -> bool {
    *n == 0
}

impl ColumnSchema {
    pub fn new(name: impl Into<String>, kind: ColumnKind) -> Self {
        Self {
            name: name.into(),
            kind,
            missing_policy: MissingPolicy::DropRow,
            categories: Vec::new(),
            positive: None,
            n_missing: 0,
        }
    }

    pub fn numeric(name: impl Into<String>) -> Self {
        Self::new(name, ColumnKind::Numeric)
    }

    pub fn categorical(name: impl Into<String>) -> Self {
        Self::new(name, ColumnKind::Categorical)
    }

    pub fn label(name: impl Into<String>) -> Self {
        Self::new(name, ColumnKind::Label)
    }

    pub fn with_missing(mut self, policy: MissingPolicy) -> Self {
        self.missing_policy = policy;
        self
    }

    pub fn with_positive(mut self, token: impl Into<String>) -> Self {
        self.positive = Some(token.into());
        self
    }
}

/// A schema file: a list of columns, parsed from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    #[serde(rename = "column")]
    pub columns: Vec<ColumnSchema>,
}

impl Schema {
    pub fn new(columns: Vec<ColumnSchema>) -> Result<Self> {
        let s = Self { columns };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let labels = self
            .columns
            .iter()
            .filter(|c| c.kind == ColumnKind::Label)
            .count();
        if labels != 1 {
            return Err(Error::Schema(format!(
                "exactly one label column required, found {labels}"
            )));
        }
        let mut seen = HashSet::new();
        for c in &self.columns {
            if !seen.insert(c.name.as_str()) {
                return Err(Error::Schema(format!("duplicate column name '{}'", c.name)));
            }
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let s: Schema = toml::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("schema serializes")
    }

    /// All columns numeric except `label`.
    pub fn numeric_with_label(names: &[&str], label: &str) -> Result<Self> {
        Self::new(
            names
                .iter()
                .map(|n| {
                    if *n == label {
                        ColumnSchema::label(*n)
                    } else {
                        ColumnSchema::numeric(*n)
                    }
                })
                .collect(),
        )
    }

    /// All-numeric schema over the header of the CSV at `path`.
    pub fn from_header(path: &Path, label: &str) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let names: Vec<&str> = header.iter().map(String::as_str).collect();
        Self::numeric_with_label(&names, label)
    }

    /// Time, V1..V28, Amount, Class: 30 numeric features.
    pub fn ecd() -> Self {
        let mut names = vec!["Time".to_string()];
        names.extend((1..=28).map(|i| format!("V{i}")));
        names.push("Amount".into());
        let mut cols: Vec<_> = names.into_iter().map(ColumnSchema::numeric).collect();
        cols.push(ColumnSchema::label("Class"));
        Self { columns: cols }
    }

    /// Small card data: half categorical, 'Transaction date' is empty and
    /// dropped, label given as Y/N.
    pub fn scd() -> Self {
        use ColumnSchema as C;
        Self {
            columns: vec![
                C::categorical("Merchant_id"),
                C::numeric("Transaction date").with_missing(MissingPolicy::DropColumn),
                C::numeric("Average Amount/transaction/day"),
                C::numeric("Transaction_amount"),
                C::categorical("Is declined"),
                C::numeric("Total Number of declines/day"),
                C::categorical("isForeignTransaction"),
                C::categorical("isHighRiskCountry"),
                C::numeric("Daily_chargeback_avg_amt"),
                C::numeric("6_month_avg_chbk_amt"),
                C::numeric("6-month_chbk_freq"),
                C::label("isFraudulent").with_positive("Y"),
            ],
        }
    }

    /// Tall card data; 'custID' is an identifier and is removed afterwards
    /// with [`drop_uninformative`].
    pub fn tcd() -> Self {
        let names = [
            "custID",
            "gender",
            "state",
            "cardholder",
            "balance",
            "numTrans",
            "numIntlTrans",
            "creditLine",
        ];
        let mut cols: Vec<_> = names.iter().map(|n| ColumnSchema::numeric(*n)).collect();
        cols.push(ColumnSchema::label("fraudRisk"));
        Self { columns: cols }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "ecd" => Some(Self::ecd()),
            "scd" => Some(Self::scd()),
            "tcd" => Some(Self::tcd()),
            _ => None,
        }
    }
}

/// Binary-labelled feature matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Dataset<S: Scalar> {
    /// Feature columns followed by the label column, after cleaning.
    schema: Vec<ColumnSchema>,
    n_features: usize,
    features: Vec<S>,
    labels: Vec<u8>,
    /// Index of each row in the dataset it was derived from, `None` for
    /// synthetic rows.
    row_ids: Vec<Option<usize>>,
}

impl<S: Scalar> Dataset<S> {
    /// Builds a dataset from a row-major matrix. Row ids default to `0..n`.
    pub fn new(
        feature_names: Vec<String>,
        features: Vec<S>,
        labels: Vec<u8>,
    ) -> Result<Self> {
        let n = labels.len();
        let mut schema: Vec<ColumnSchema> =
            feature_names.into_iter().map(ColumnSchema::numeric).collect();
        schema.push(ColumnSchema::label("label"));
        Self::from_parts(schema, features, labels, (0..n).map(Some).collect())
    }

    pub(crate) fn from_parts(
        schema: Vec<ColumnSchema>,
        features: Vec<S>,
        labels: Vec<u8>,
        row_ids: Vec<Option<usize>>,
    ) -> Result<Self> {
        let n_features = schema
            .iter()
            .filter(|c| c.kind != ColumnKind::Label)
            .count();
        if schema.last().map(|c| c.kind) != Some(ColumnKind::Label) {
            return Err(Error::Schema("dataset schema must end with the label".into()));
        }
        if features.len() != labels.len() * n_features {
            return Err(Error::Shape(format!(
                "{} feature cells for {} rows of width {}",
                features.len(),
                labels.len(),
                n_features
            )));
        }
        if row_ids.len() != labels.len() {
            return Err(Error::Shape("row id count differs from row count".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y > 1) {
            return Err(Error::InvalidArgument(format!("label {bad} outside {{0,1}}")));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature matrix".into()));
        }
        Ok(Self {
            schema,
            n_features,
            features,
            labels,
            row_ids,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_pos(&self) -> usize {
        self.labels.iter().filter(|&&y| y == 1).count()
    }

    pub fn n_neg(&self) -> usize {
        self.n_rows() - self.n_pos()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[S] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[S]> + '_ {
        // chunks_exact(0) panics, so width-0 datasets yield empty slices.
        (0..self.n_rows()).map(move |i| self.row(i))
    }

    pub fn features(&self) -> &[S] {
        &self.features
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }

    pub fn row_ids(&self) -> &[Option<usize>] {
        &self.row_ids
    }

    pub fn column(&self, j: usize) -> Vec<S> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn schema(&self) -> &[ColumnSchema] {
        &self.schema
    }

    pub fn feature_schema(&self) -> &[ColumnSchema] {
        &self.schema[..self.n_features]
    }

    pub fn label_schema(&self) -> &ColumnSchema {
        self.schema.last().expect("schema has a label")
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.feature_schema().iter().map(|c| c.name.clone()).collect()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_schema().iter().position(|c| c.name == name)
    }

    /// Rows at `idx`, in that order. Row ids are carried through.
    pub fn select(&self, idx: &[usize]) -> Self {
        let mut features = Vec::with_capacity(idx.len() * self.n_features);
        let mut labels = Vec::with_capacity(idx.len());
        let mut row_ids = Vec::with_capacity(idx.len());
        for &i in idx {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
            row_ids.push(self.row_ids[i]);
        }
        Self {
            schema: self.schema.clone(),
            n_features: self.n_features,
            features,
            labels,
            row_ids,
        }
    }

    /// Same rows and labels, new feature matrix of the same shape.
    pub fn with_features(&self, features: Vec<S>) -> Result<Self> {
        Self::from_parts(
            self.schema.clone(),
            features,
            self.labels.clone(),
            self.row_ids.clone(),
        )
    }

    /// Appends rows not present in the source (ids `None`).
    pub(crate) fn with_appended(&self, features: &[S], labels: &[u8]) -> Result<Self> {
        let mut f = self.features.clone();
        f.extend_from_slice(features);
        let mut l = self.labels.clone();
        l.extend_from_slice(labels);
        let mut ids = self.row_ids.clone();
        ids.extend(std::iter::repeat_n(None, labels.len()));
        Self::from_parts(self.schema.clone(), f, l, ids)
    }

    /// Renumbers row ids as `0..n`, making this the root of a new lineage.
    pub fn reindexed(mut self) -> Self {
        self.row_ids = (0..self.n_rows()).map(Some).collect();
        self
    }

    pub fn indices_of(&self, label: u8) -> Vec<usize> {
        (0..self.n_rows()).filter(|&i| self.labels[i] == label).collect()
    }

    /// Casts the feature matrix to another scalar type.
    pub fn cast<T: Scalar>(&self) -> Dataset<T> {
        Dataset {
            schema: self.schema.clone(),
            n_features: self.n_features,
            features: self.features.iter().map(|v| T::of(v.as_f64())).collect(),
            labels: self.labels.clone(),
            row_ids: self.row_ids.clone(),
        }
    }

    /// Writes the dataset as comma-delimited text with a header. Values are
    /// printed in shortest round-trip form; categorical columns are written
    /// as their codes and the label as 0/1.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let header: Vec<&str> = self.schema.iter().map(|c| c.name.as_str()).collect();
        let io = |e| Error::io(path, e);
        writeln!(w, "{}", csv_line(header.iter().copied())).map_err(io)?;
        for (i, row) in self.rows().enumerate() {
            let mut line = String::new();
            for v in row {
                line.push_str(&format!("{v},"));
            }
            line.push_str(&self.labels[i].to_string());
            writeln!(w, "{line}").map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

fn csv_line<'a>(fields: impl Iterator<Item = &'a str>) -> String {
    fields
        .map(|f| {
            if f.contains([',', '"', '\n']) {
                format!("\"{}\"", f.replace('"', "\"\""))
            } else {
                f.to_string()
            }
        })
        .collect::<Vec<_>>()
        .join(",")
}

/// Encodes strings to codes by order of first appearance, extending
/// `categories` with unseen values.
pub fn encode_with<S: Scalar>(categories: &mut Vec<String>, column: &[&str]) -> Vec<S> {
    let mut index: HashMap<String, usize> = categories
        .iter()
        .enumerate()
        .map(|(i, c)| (c.clone(), i))
        .collect();
    column
        .iter()
        .map(|v| {
            let code = *index.entry((*v).to_string()).or_insert_with(|| {
                categories.push((*v).to_string());
                categories.len() - 1
            });
            S::of_usize(code)
        })
        .collect()
}

/// Ordinal encoding by first appearance. Returns the codes and the code book.
pub fn encode_categoricals<S: Scalar>(column: &[&str]) -> (Vec<S>, Vec<String>) {
    let mut categories = Vec::new();
    let codes = encode_with(&mut categories, column);
    (codes, categories)
}

fn is_missing(cell: &str) -> bool {
    let t = cell.trim();
    t.is_empty() || t.eq_ignore_ascii_case("na") || t.eq_ignore_ascii_case("nan")
}

fn parse_label(col: &ColumnSchema, raw: &str) -> std::result::Result<u8, String> {
    let t = raw.trim();
    if let Some(pos) = &col.positive {
        return Ok(u8::from(t == pos));
    }
    match t.parse::<f64>() {
        Ok(0.0) => Ok(0),
        Ok(1.0) => Ok(1),
        _ => Err(format!("label '{t}' outside {{0,1}}")),
    }
}

/// Loads a comma-delimited file with a header row.
///
/// The header must name exactly the schema's columns, in any order.
/// `drop` columns are removed, categorical columns are encoded (extending
/// any code book already present in the schema) and missing cells are
/// handled per column policy. A column in which every cell is missing is
/// dropped unless its policy is `forbid`.
pub fn load_csv<S: Scalar>(path: &Path, schema: &Schema) -> Result<Dataset<S>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, &path.display().to_string(), schema)
}

pub fn read_csv<S: Scalar, R: std::io::Read>(
    reader: R,
    source: &str,
    schema: &Schema,
) -> Result<Dataset<S>> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();

    let by_name: HashMap<&str, &ColumnSchema> =
        schema.columns.iter().map(|c| (c.name.as_str(), c)).collect();
    {
        let header_set: HashSet<&str> = header.iter().map(String::as_str).collect();
        let unknown: Vec<_> = header
            .iter()
            .filter(|h| !by_name.contains_key(h.as_str()))
            .collect();
        let absent: Vec<_> = schema
            .columns
            .iter()
            .filter(|c| !header_set.contains(c.name.as_str()))
            .map(|c| &c.name)
            .collect();
        if !unknown.is_empty() || !absent.is_empty() || header_set.len() != header.len() {
            return Err(Error::Schema(format!(
                "header does not match schema (unexpected {unknown:?}, missing {absent:?})"
            )));
        }
    }

    let records: Vec<csv::StringRecord> = rdr.records().collect::<std::result::Result<_, _>>()?;
    let n = records.len();

    // Column positions in file order, schema order for output.
    let pos: HashMap<&str, usize> = header
        .iter()
        .enumerate()
        .map(|(i, h)| (h.as_str(), i))
        .collect();
    let feature_cols: Vec<&ColumnSchema> = schema
        .columns
        .iter()
        .filter(|c| matches!(c.kind, ColumnKind::Numeric | ColumnKind::Categorical))
        .collect();
    let label_col = schema
        .columns
        .iter()
        .find(|c| c.kind == ColumnKind::Label)
        .expect("validated");

    let cell = |r: usize, name: &str| -> &str { records[r].get(pos[name]).unwrap_or("") };
    let line_of = |r: usize| {
        records[r]
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or(r + 2)
    };

    let mut kept_cols: Vec<ColumnSchema> = Vec::new();
    let mut row_ok = vec![true; n];
    for col in &feature_cols {
        let missing = (0..n).filter(|&r| is_missing(cell(r, &col.name))).count();
        let mut out = (*col).clone();
        out.n_missing = missing;
        match col.missing_policy {
            MissingPolicy::Forbid if missing > 0 => {
                let r = (0..n).find(|&r| is_missing(cell(r, &col.name))).unwrap();
                return Err(Error::Parse {
                    path: source.into(),
                    line: line_of(r),
                    msg: format!("missing value in column '{}'", col.name),
                });
            }
            MissingPolicy::DropColumn if missing > 0 => continue,
            MissingPolicy::DropRow if n > 0 && missing == n => continue,
            MissingPolicy::DropRow => {
                for (r, ok) in row_ok.iter_mut().enumerate() {
                    if is_missing(cell(r, &col.name)) {
                        *ok = false;
                    }
                }
            }
            _ => {}
        }
        kept_cols.push(out);
    }
    let label_missing = (0..n).filter(|&r| is_missing(cell(r, &label_col.name))).count();
    for (r, ok) in row_ok.iter_mut().enumerate() {
        if is_missing(cell(r, &label_col.name)) {
            if label_col.missing_policy == MissingPolicy::Forbid {
                return Err(Error::Parse {
                    path: source.into(),
                    line: line_of(r),
                    msg: "missing label".into(),
                });
            }
            *ok = false;
        }
    }
    let rows: Vec<usize> = (0..n).filter(|&r| row_ok[r]).collect();
    let width = kept_cols.len();

    let mut features = vec![S::zero(); rows.len() * width];
    for (j, col) in kept_cols.iter_mut().enumerate() {
        match col.kind {
            ColumnKind::Categorical => {
                let raw: Vec<&str> = rows.iter().map(|&r| cell(r, &col.name)).collect();
                let codes = encode_with::<S>(&mut col.categories, &raw);
                for (i, v) in codes.into_iter().enumerate() {
                    features[i * width + j] = v;
                }
            }
            _ => {
                for (i, &r) in rows.iter().enumerate() {
                    let raw = cell(r, &col.name);
                    let v: f64 = raw.parse().map_err(|_| Error::Parse {
                        path: source.into(),
                        line: line_of(r),
                        msg: format!("column '{}': cannot parse '{raw}' as a number", col.name),
                    })?;
                    if !v.is_finite() {
                        return Err(Error::Parse {
                            path: source.into(),
                            line: line_of(r),
                            msg: format!("column '{}': non-finite value", col.name),
                        });
                    }
                    features[i * width + j] = S::of(v);
                }
            }
        }
    }
    let mut labels = Vec::with_capacity(rows.len());
    for &r in &rows {
        labels.push(
            parse_label(label_col, cell(r, &label_col.name)).map_err(|msg| Error::Parse {
                path: source.into(),
                line: line_of(r),
                msg,
            })?,
        );
    }
    let mut label_schema = label_col.clone();
    label_schema.n_missing = label_missing;
    kept_cols.push(label_schema);
    let ids = (0..rows.len()).map(Some).collect();
    Dataset::from_parts(kept_cols, features, labels, ids)
}

/// Removes a feature column that carries no information (an identifier or
/// a constant).
pub fn drop_uninformative<S: Scalar>(ds: &Dataset<S>, column: &str) -> Result<Dataset<S>> {
    if ds.label_schema().name == column {
        return Err(Error::InvalidArgument(format!(
            "'{column}' is the label and cannot be dropped"
        )));
    }
    let j = ds
        .feature_index(column)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown column '{column}'")))?;
    let width = ds.n_features();
    let features: Vec<S> = ds
        .rows()
        .flat_map(|r| r.iter().enumerate().filter(|(k, _)| *k != j).map(|(_, v)| *v))
        .collect();
    let mut schema = ds.schema().to_vec();
    schema.remove(j);
    debug_assert_eq!(features.len(), ds.n_rows() * (width - 1));
    Dataset::from_parts(schema, features, ds.labels().to_vec(), ds.row_ids().to_vec())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnProfile {
    pub name: String,
    pub mean: f64,
    pub std: f64,
    pub n_missing: usize,
    pub n_distinct: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetProfile {
    pub n_rows: usize,
    pub n_features: usize,
    pub n_pos: usize,
    pub n_neg: usize,
    pub fraud_fraction: f64,
    pub columns: Vec<ColumnProfile>,
}

pub fn profile<S: Scalar>(ds: &Dataset<S>) -> Result<DatasetProfile> {
    let n = ds.n_rows();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let columns = ds
        .feature_schema()
        .iter()
        .enumerate()
        .map(|(j, c)| {
            let col: Vec<f64> = ds.rows().map(|r| r[j].as_f64()).collect();
            let mean = col.iter().sum::<f64>() / n as f64;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            let distinct: HashSet<u64> = col.iter().map(|v| v.to_bits()).collect();
            ColumnProfile {
                name: c.name.clone(),
                mean,
                std: var.sqrt(),
                n_missing: c.n_missing,
                n_distinct: distinct.len(),
            }
        })
        .collect();
    let n_pos = ds.n_pos();
    Ok(DatasetProfile {
        n_rows: n,
        n_features: ds.n_features(),
        n_pos,
        n_neg: n - n_pos,
        fraud_fraction: n_pos as f64 / n as f64,
        columns,
    })
}

/// Draws `n` rows without replacement. With `preserve_fraction` the
/// positive count is `floor(n * n_pos / n_rows)` and the remainder comes
/// from the negatives. Returned rows keep their source order.
pub fn subsample<S: Scalar>(
    ds: &Dataset<S>,
    n: usize,
    preserve_fraction: bool,
    seed: u64,
) -> Result<Dataset<S>> {
    if n > ds.n_rows() {
        return Err(Error::InvalidArgument(format!(
            "cannot draw {n} rows from {}",
            ds.n_rows()
        )));
    }
    if !preserve_fraction {
        let mut rng = seed::rng(seed);
        let mut idx: Vec<usize> = (0..ds.n_rows()).collect();
        idx.shuffle(&mut rng);
        idx.truncate(n);
        idx.sort_unstable();
        return Ok(ds.select(&idx));
    }
    let n_pos = ((n as u128 * ds.n_pos() as u128) / ds.n_rows().max(1) as u128) as usize;
    subsample_counts(ds, n_pos, n - n_pos, seed)
}

/// Draws exactly `n_pos` positives and `n_neg` negatives.
pub fn subsample_counts<S: Scalar>(
    ds: &Dataset<S>,
    n_pos: usize,
    n_neg: usize,
    seed: u64,
) -> Result<Dataset<S>> {
    let mut pos = ds.indices_of(1);
    let mut neg = ds.indices_of(0);
    if n_pos > pos.len() || n_neg > neg.len() {
        return Err(Error::InvalidArgument(format!(
            "requested {n_pos}/{n_neg} positives/negatives, have {}/{}",
            pos.len(),
            neg.len()
        )));
    }
    let mut rng = seed::rng(seed);
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let mut idx: Vec<usize> = pos[..n_pos].iter().chain(&neg[..n_neg]).copied().collect();
    idx.sort_unstable();
    Ok(ds.select(&idx))
}
