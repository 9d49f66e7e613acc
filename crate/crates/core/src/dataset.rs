//! Binary-labelled tabular data, CSV ingestion, stratified splitting and the
//! seed plumbing shared by every randomized operation.

use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use log::warn;
use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Class label. The minority class is always `Positive`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    pub fn is_positive(self) -> bool {
        self == Label::Positive
    }

    pub fn from_bool(positive: bool) -> Self {
        if positive {
            Label::Positive
        } else {
            Label::Negative
        }
    }
}

/// Feature matrix with binary labels.
///
/// Invariants enforced by [`Dataset::new`]: at least one row and one column,
/// every feature finite, both classes present, and no more positives than
/// negatives.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Array2<f64>,
    labels: Vec<Label>,
    feature_names: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(features: Array2<f64>, labels: Vec<Label>) -> Result<Self> {
        let (n, d) = features.dim();
        if n == 0 || d == 0 {
            return Err(Error::Data(format!("dataset must be non-empty, got {n}x{d}")));
        }
        if labels.len() != n {
            return Err(Error::shape(format!("{n} labels"), labels.len()));
        }
        if let Some(((row, col), _)) = features.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite feature value at row {row}, column {col}")));
        }
        let positives = labels.iter().filter(|l| l.is_positive()).count();
        if positives == 0 || positives == n {
            return Err(Error::Data("dataset must contain both classes".into()));
        }
        if positives > n - positives {
            return Err(Error::Data(format!(
                "positive (minority) class has {positives} rows but negative class only {}",
                n - positives
            )));
        }
        Ok(Dataset {
            features,
            labels,
            feature_names: None,
        })
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n_features() {
            return Err(Error::shape(format!("{} feature names", self.n_features()), names.len()));
        }
        self.feature_names = Some(names);
        Ok(self)
    }

    pub fn n_rows(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.features.row(i)
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    /// `(n_majority, n_minority)`.
    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.labels.iter().filter(|l| l.is_positive()).count();
        (self.labels.len() - pos, pos)
    }

    pub fn indices_of(&self, label: Label) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == label)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn rows_of(&self, label: Label) -> Array2<f64> {
        self.features.select(Axis(0), &self.indices_of(label))
    }

    pub fn minority(&self) -> Array2<f64> {
        self.rows_of(Label::Positive)
    }

    pub fn majority(&self) -> Array2<f64> {
        self.rows_of(Label::Negative)
    }

    /// Subset of rows in the given order. Fails if the subset loses a class.
    pub fn select(&self, rows: &[usize]) -> Result<Dataset> {
        let features = self.features.select(Axis(0), rows);
        let labels = rows.iter().map(|&i| self.labels[i]).collect();
        let ds = Dataset::new(features, labels)?;
        Ok(Dataset {
            feature_names: self.feature_names.clone(),
            ..ds
        })
    }

    /// Same labels and names, replaced feature matrix of identical shape.
    pub fn map_features(&self, features: Array2<f64>) -> Result<Dataset> {
        if features.dim() != self.features.dim() {
            return Err(Error::shape(format!("{:?}", self.features.dim()), format!("{:?}", features.dim())));
        }
        let ds = Dataset::new(features, self.labels.clone())?;
        Ok(Dataset {
            feature_names: self.feature_names.clone(),
            ..ds
        })
    }

    /// Appends rows with the given label.
    pub fn append(&self, rows: ArrayView2<'_, f64>, label: Label) -> Result<Dataset> {
        if rows.ncols() != self.n_features() {
            return Err(Error::shape(format!("{} columns", self.n_features()), rows.ncols()));
        }
        let features = ndarray::concatenate(Axis(0), &[self.features.view(), rows])
            .map_err(|e| Error::Data(e.to_string()))?;
        let mut labels = self.labels.clone();
        labels.extend(std::iter::repeat_n(label, rows.nrows()));
        let ds = Dataset::new(features, labels)?;
        Ok(Dataset {
            feature_names: self.feature_names.clone(),
            ..ds
        })
    }

    /// Stable content hash of features and labels.
    pub fn fingerprint(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update((self.n_rows() as u64).to_le_bytes());
        h.update((self.n_features() as u64).to_le_bytes());
        for v in self.features.iter() {
            h.update(v.to_bits().to_le_bytes());
        }
        for l in &self.labels {
            h.update([l.is_positive() as u8]);
        }
        h.finalize().into()
    }

    fn column_names(&self) -> Vec<String> {
        match &self.feature_names {
            Some(names) => names.clone(),
            None => (0..self.n_features()).map(|j| format!("x{j}")).collect(),
        }
    }
}

/// Label column reference: header name or zero-based index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ColumnRef {
    Name(String),
    Index(usize),
}

impl ColumnRef {
    /// Numeric strings become indices, anything else a name.
    pub fn parse(s: &str) -> Self {
        match s.trim().parse::<usize>() {
            Ok(i) => ColumnRef::Index(i),
            Err(_) => ColumnRef::Name(s.trim().to_string()),
        }
    }
}

impl fmt::Display for ColumnRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ColumnRef::Name(n) => f.write_str(n),
            ColumnRef::Index(i) => write!(f, "{i}"),
        }
    }
}

/// Which column holds the label and which raw value marks the positive class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSpec {
    pub column: ColumnRef,
    pub positive_value: String,
}

impl LabelSpec {
    pub fn new(column: ColumnRef, positive_value: impl Into<String>) -> Self {
        LabelSpec {
            column,
            positive_value: positive_value.into(),
        }
    }
}

impl Default for LabelSpec {
    /// Matches the layout written by [`write_csv`].
    fn default() -> Self {
        LabelSpec::new(ColumnRef::Name(LABEL_COLUMN.into()), "1")
    }
}

/// Header used for the label column by [`write_csv`].
pub const LABEL_COLUMN: &str = "label";

pub fn load_csv(path: impl AsRef<Path>, spec: &LabelSpec) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path)
        .map_err(|e| std::io::Error::new(e.kind(), format!("cannot open {}: {e}", path.display())))?;
    read_csv(file, spec)
}

/// Reads a comma-separated file with a header row. The label column is
/// resolved by `spec`; every other column must be numeric.
pub fn read_csv<R: Read>(reader: R, spec: &LabelSpec) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let label_col = match &spec.column {
        ColumnRef::Name(name) => headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Config(format!("label column `{name}` not found in header")))?,
        ColumnRef::Index(i) if *i < headers.len() => *i,
        ColumnRef::Index(i) => {
            return Err(Error::Config(format!(
                "label column index {i} out of range ({} columns)",
                headers.len()
            )))
        }
    };
    if headers.len() < 2 {
        return Err(Error::Config("need at least one feature column besides the label".into()));
    }

    let d = headers.len() - 1;
    let mut values = Vec::new();
    let mut raw_labels = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let row = r + 1;
        if record.len() != headers.len() {
            return Err(Error::Parse {
                row,
                column: "-".into(),
                message: format!("expected {} fields, found {}", headers.len(), record.len()),
            });
        }
        for (c, cell) in record.iter().enumerate() {
            if c == label_col {
                raw_labels.push(cell.to_string());
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                row,
                column: headers[c].clone(),
                message,
            };
            if cell.is_empty() {
                return Err(parse_err("missing value".into()));
            }
            let v: f64 = cell
                .parse()
                .map_err(|_| parse_err(format!("`{cell}` is not a number")))?;
            if !v.is_finite() {
                return Err(parse_err(format!("`{cell}` is not finite")));
            }
            values.push(v);
        }
    }
    let n = raw_labels.len();
    if n == 0 {
        return Err(Error::Data("file has no data rows".into()));
    }

    let mut distinct: Vec<&str> = raw_labels.iter().map(String::as_str).collect();
    distinct.sort_unstable();
    distinct.dedup();
    if !distinct.contains(&spec.positive_value.as_str()) {
        return Err(Error::Config(format!(
            "positive value `{}` does not occur in label column",
            spec.positive_value
        )));
    }
    if distinct.len() != 2 {
        return Err(Error::Data(format!(
            "label column must have exactly two distinct values, found {}: {:?}",
            distinct.len(),
            distinct.iter().take(5).collect::<Vec<_>>()
        )));
    }

    let mut positive: Vec<bool> = raw_labels.iter().map(|l| *l == spec.positive_value).collect();
    let n_pos = positive.iter().filter(|&&p| p).count();
    if n_pos > n - n_pos {
        warn!(
            "positive value `{}` is the majority class ({n_pos} of {n} rows); treating the other class as positive",
            spec.positive_value
        );
        positive.iter_mut().for_each(|p| *p = !*p);
    }

    let features = Array2::from_shape_vec((n, d), values).map_err(|e| Error::Data(e.to_string()))?;
    let labels = positive.into_iter().map(Label::from_bool).collect();
    let names = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != label_col)
        .map(|(_, h)| h.clone())
        .collect();
    Dataset::new(features, labels)?.with_feature_names(names)
}

/// Writes features plus a trailing `label` column (`1` positive, `0` negative).
/// Reals are printed in shortest round-trip form, so reloading with
/// [`LabelSpec::default`] reproduces the dataset exactly.
pub fn write_csv<W: Write>(ds: &Dataset, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = ds.column_names();
    header.push(LABEL_COLUMN.to_string());
    wtr.write_record(&header)?;
    let mut record = Vec::with_capacity(header.len());
    for (row, label) in ds.features.rows().into_iter().zip(&ds.labels) {
        record.clear();
        record.extend(row.iter().map(|v| v.to_string()));
        record.push(if label.is_positive() { "1" } else { "0" }.to_string());
        wtr.write_record(&record)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn save_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    write_csv(ds, File::create(path)?)
}

/// Train/test row indices for a stratified split, each half in ascending order.
///
/// Each class contributes `round(count * test_fraction)` rows to the test half,
/// clamped so that both halves keep at least one row of every class.
pub fn stratified_split_indices(
    ds: &Dataset,
    test_fraction: f64,
    rng: &mut SeedStream,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Argument(format!("test fraction must lie in (0, 1), got {test_fraction}")));
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for label in [Label::Negative, Label::Positive] {
        let mut idx = ds.indices_of(label);
        let count = idx.len();
        if count < 2 {
            return Err(Error::Data(format!(
                "{label:?} class has {count} member(s); stratified split needs at least 2"
            )));
        }
        idx.shuffle(rng);
        let n_test = ((count as f64 * test_fraction).round() as usize).clamp(1, count - 1);
        test.extend_from_slice(&idx[..n_test]);
        train.extend_from_slice(&idx[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn stratified_split(ds: &Dataset, test_fraction: f64, seed: Seed) -> Result<(Dataset, Dataset)> {
    let mut rng = seed.stream("split");
    let (train, test) = stratified_split_indices(ds, test_fraction, &mut rng)?;
    Ok((ds.select(&train)?, ds.select(&test)?))
}

/// RNG used for every random stream in the crate.
pub type SeedStream = ChaCha8Rng;

/// Master seed. Child seeds and RNG streams are derived by hashing the
/// master value together with a stream label, so distinct labels give
/// independent, reproducible streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Seed(pub u64);

impl Seed {
    fn digest(self, label: &str) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(b"kdesample/seed/v1\0");
        h.update(label.as_bytes());
        h.update([0u8]);
        h.update(self.0.to_le_bytes());
        h.finalize().into()
    }

    pub fn child(self, label: &str) -> Seed {
        let d = self.digest(label);
        Seed(u64::from_le_bytes(d[..8].try_into().expect("8 bytes")))
    }

    pub fn stream(self, label: &str) -> SeedStream {
        ChaCha8Rng::from_seed(self.digest(label))
    }
}

impl fmt::Display for Seed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}
