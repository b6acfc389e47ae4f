//! Binary-labelled datasets: CSV ingestion, random halving and bootstrap
//! class balancing.

use std::fmt;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// A binary class label in {-1, +1}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "i8", try_from = "i8")]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    pub fn value(self) -> i8 {
        match self {
            Label::Negative => -1,
            Label::Positive => 1,
        }
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.value())
    }

    pub fn flipped(self) -> Label {
        match self {
            Label::Negative => Label::Positive,
            Label::Positive => Label::Negative,
        }
    }

    pub fn from_sign(positive: bool) -> Label {
        if positive {
            Label::Positive
        } else {
            Label::Negative
        }
    }

    /// Parses a label token. Returns the label and whether the token was the
    /// `0` alias for -1.
    pub fn parse_token(token: &str) -> Option<(Label, bool)> {
        match token.trim() {
            "1" | "+1" => Some((Label::Positive, false)),
            "-1" => Some((Label::Negative, false)),
            "0" => Some((Label::Negative, true)),
            _ => None,
        }
    }
}

impl From<Label> for i8 {
    fn from(l: Label) -> i8 {
        l.value()
    }
}

impl TryFrom<i8> for Label {
    type Error = String;

    fn try_from(v: i8) -> std::result::Result<Self, Self::Error> {
        match v {
            1 => Ok(Label::Positive),
            -1 => Ok(Label::Negative),
            other => Err(format!("label must be -1 or +1, got {other}")),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

/// Feature vectors with one label each. All vectors share `feature_count`
/// and every component is finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    feature_names: Vec<String>,
    label_column: String,
    feature_count: usize,
    features: Vec<f64>,
    labels: Vec<Label>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, rows: Vec<Vec<f64>>, labels: Vec<Label>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::NoInstances);
        }
        if rows.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: rows.len(),
                found: labels.len(),
            });
        }
        let feature_count = rows[0].len();
        let mut features = Vec::with_capacity(rows.len() * feature_count);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != feature_count {
                return Err(Error::DimensionMismatch {
                    expected: feature_count,
                    found: row.len(),
                });
            }
            if let Some(c) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite { row: r, column: c });
            }
            features.extend_from_slice(row);
        }
        Ok(Dataset {
            name: name.into(),
            feature_names: (0..feature_count).map(|c| format!("x{c}")).collect(),
            label_column: "label".to_string(),
            feature_count,
            features,
            labels,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn label_column(&self) -> &str {
        &self.label_column
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_count(&self) -> usize {
        self.feature_count
    }

    pub fn features(&self, i: usize) -> &[f64] {
        &self.features[i * self.feature_count..(i + 1) * self.feature_count]
    }

    pub fn label(&self, i: usize) -> Label {
        self.labels[i]
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn rows(&self) -> impl Iterator<Item = (&[f64], Label)> + '_ {
        self.features
            .chunks_exact(self.feature_count.max(1))
            .zip(self.labels.iter().copied())
    }

    /// (positive count, negative count)
    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.labels.iter().filter(|&&l| l == Label::Positive).count();
        (pos, self.labels.len() - pos)
    }

    pub fn has_both_classes(&self) -> bool {
        let (pos, neg) = self.class_counts();
        pos > 0 && neg > 0
    }

    /// Rows at `indices`, in that order. Indices may repeat.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.feature_count);
        for &i in indices {
            features.extend_from_slice(self.features(i));
        }
        Dataset {
            name: self.name.clone(),
            feature_names: self.feature_names.clone(),
            label_column: self.label_column.clone(),
            feature_count: self.feature_count,
            features,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Same feature vectors with `labels` substituted in order.
    pub fn relabel(&self, labels: &[Label]) -> Result<Dataset> {
        if labels.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: labels.len(),
            });
        }
        let mut out = self.clone();
        out.labels = labels.to_vec();
        Ok(out)
    }

    pub fn load_csv(path: impl AsRef<Path>, label_column: &str) -> Result<Dataset> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".to_string());
        Self::read_csv(file, &name, label_column)
    }

    /// Reads CSV text with a header row. Row numbers in errors are 1-based
    /// and count data rows only.
    pub fn read_csv<R: std::io::Read>(reader: R, name: &str, label_column: &str) -> Result<Dataset> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
            return Err(Error::NoInstances);
        }
        let label_idx = header
            .iter()
            .position(|h| h == label_column)
            .ok_or_else(|| Error::MissingLabelColumn(label_column.to_string()))?;
        let feature_names: Vec<String> = header
            .iter()
            .enumerate()
            .filter(|&(c, _)| c != label_idx)
            .map(|(_, h)| h.clone())
            .collect();

        let mut features = Vec::new();
        let mut labels = Vec::new();
        let mut zero_alias = 0usize;
        for (r, record) in rdr.records().enumerate() {
            let record = record?;
            let row = r + 1;
            if record.len() != header.len() {
                return Err(Error::RowWidth {
                    row,
                    expected: header.len(),
                    found: record.len(),
                });
            }
            for (c, token) in record.iter().enumerate() {
                if c == label_idx {
                    let (label, alias) = Label::parse_token(token).ok_or_else(|| Error::BadLabel {
                        row,
                        token: token.to_string(),
                    })?;
                    zero_alias += usize::from(alias);
                    labels.push(label);
                } else {
                    let value: f64 = token.parse().map_err(|_| Error::BadNumber {
                        row,
                        column: header[c].clone(),
                        token: token.to_string(),
                    })?;
                    if !value.is_finite() {
                        return Err(Error::BadNumber {
                            row,
                            column: header[c].clone(),
                            token: token.to_string(),
                        });
                    }
                    features.push(value);
                }
            }
        }
        if labels.is_empty() {
            return Err(Error::NoInstances);
        }
        if zero_alias > 0 {
            log::warn!("{name}: {zero_alias} label(s) given as `0` were read as -1");
        }
        Ok(Dataset {
            name: name.to_string(),
            feature_count: feature_names.len(),
            feature_names,
            label_column: label_column.to_string(),
            features,
            labels,
        })
    }

    /// Writes the dataset as CSV: feature columns then the label column.
    /// Floats use the shortest representation that parses back to the same
    /// bits.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = String::new();
        for name in &self.feature_names {
            out.push_str(name);
            out.push(',');
        }
        out.push_str(&self.label_column);
        out.push('\n');
        for (x, y) in self.rows() {
            for v in x {
                out.push_str(&format!("{v},"));
            }
            out.push_str(&format!("{y}\n"));
        }
        file.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
    }

    /// Uniformly random permutation, then the first ceil(k/2) permuted rows
    /// go to part 0 and the rest to part 1. Each part keeps source order.
    pub fn random_split(&self, seed: u64) -> Result<SplitPair> {
        if self.len() < 2 {
            return Err(Error::TooFewInstances {
                needed: 2,
                found: self.len(),
            });
        }
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.shuffle(&mut rng_from_seed(seed));
        let cut = self.len().div_ceil(2);
        let mut idx0 = order[..cut].to_vec();
        let mut idx1 = order[cut..].to_vec();
        idx0.sort_unstable();
        idx1.sort_unstable();
        Ok(SplitPair {
            part0: self.subset(&idx0),
            part1: self.subset(&idx1),
            indices0: idx0,
            indices1: idx1,
            seed,
        })
    }

    /// Upsamples the minority class with replacement until both classes
    /// have the majority count. Added rows are appended after the original
    /// rows.
    pub fn bootstrap_balance(&self, seed: u64) -> Result<Dataset> {
        let (pos, neg) = self.class_counts();
        if pos == 0 || neg == 0 {
            return Err(Error::SingleClass);
        }
        if pos == neg {
            return Ok(self.clone());
        }
        let minority = if pos < neg {
            Label::Positive
        } else {
            Label::Negative
        };
        let pool: Vec<usize> = (0..self.len()).filter(|&i| self.labels[i] == minority).collect();
        let missing = pos.max(neg) - pool.len();
        let mut rng = rng_from_seed(seed);
        let mut indices: Vec<usize> = (0..self.len()).collect();
        indices.extend((0..missing).map(|_| pool[rng.random_range(0..pool.len())]));
        Ok(self.subset(&indices))
    }
}

/// Two disjoint halves of a dataset, with the source row indices of each.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitPair {
    pub part0: Dataset,
    pub part1: Dataset,
    pub indices0: Vec<usize>,
    pub indices1: Vec<usize>,
    pub seed: u64,
}

impl SplitPair {
    /// Stable identifier of the part-1 row set.
    pub fn fingerprint(&self) -> u64 {
        let bytes: Vec<u8> = self
            .indices1
            .iter()
            .flat_map(|&i| (i as u64).to_le_bytes())
            .collect();
        crate::rng::fnv1a(&bytes)
    }
}
