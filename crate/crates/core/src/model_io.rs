//! Prediction, label and feature matrices and their CSV interchange format.
//!
//! Every file is a header row of column names followed by one row per
//! sample. Fields are comma separated and never quoted, so column names may
//! not contain commas. Both LF and CRLF line endings are accepted; LF is
//! written. Reals are written with 17 significant digits, which makes
//! `read(write(m)) == m` hold bit for bit.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Ordered, nonempty list of unique class names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassList(Vec<String>);

impl ClassList {
    pub fn new<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() {
            return Err(Error::EmptyClassList);
        }
        let mut seen = HashSet::with_capacity(names.len());
        for (column, name) in names.iter().enumerate() {
            if name.is_empty() {
                return Err(Error::EmptyClassName { column: column + 1 });
            }
            if name.contains(',') {
                return Err(Error::CommaInClassName { name: name.clone() });
            }
            if !seen.insert(name.as_str()) {
                return Err(Error::DuplicateClass { name: name.clone() });
            }
        }
        Ok(Self(names))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.0
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.0.iter().position(|n| n == name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }
}

/// N x C matrix of probabilities in [0, 1], stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionMatrix {
    classes: ClassList,
    n_samples: usize,
    values: Vec<f64>,
}

impl PredictionMatrix {
    /// Builds a matrix from row-major values, validating shape and range.
    pub fn from_flat(classes: ClassList, values: Vec<f64>) -> Result<Self> {
        let n_samples = checked_rows(&classes, values.len())?;
        for (idx, &v) in values.iter().enumerate() {
            let (row, col) = (idx / classes.len() + 1, idx % classes.len());
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    row,
                    class: classes.0[col].clone(),
                    value: v,
                });
            }
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::OutOfRange {
                    row,
                    class: classes.0[col].clone(),
                    value: v,
                });
            }
        }
        Ok(Self {
            classes,
            n_samples,
            values,
        })
    }

    pub fn from_rows(classes: ClassList, rows: &[Vec<f64>]) -> Result<Self> {
        let values = flatten_rows(&classes, rows)?;
        Self::from_flat(classes, values)
    }

    pub fn classes(&self) -> &ClassList {
        &self.classes
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n_classes() + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let c = self.n_classes();
        &self.values[row * c..(row + 1) * c]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        self.values
            .iter()
            .skip(col)
            .step_by(self.n_classes())
            .copied()
            .collect()
    }

    /// New matrix holding the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let values = gather_rows(&self.values, self.n_classes(), rows);
        Self::from_flat(self.classes.clone(), values)
    }
}

/// N x C matrix of binary ground-truth labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMatrix {
    classes: ClassList,
    n_samples: usize,
    values: Vec<u8>,
}

impl LabelMatrix {
    pub fn from_flat(classes: ClassList, values: Vec<u8>) -> Result<Self> {
        let n_samples = checked_rows(&classes, values.len())?;
        if let Some(idx) = values.iter().position(|&v| v > 1) {
            return Err(Error::NonBinary {
                row: idx / classes.len() + 1,
                class: classes.0[idx % classes.len()].clone(),
                value: values[idx].to_string(),
            });
        }
        Ok(Self {
            classes,
            n_samples,
            values,
        })
    }

    pub fn from_rows(classes: ClassList, rows: &[Vec<u8>]) -> Result<Self> {
        let values = flatten_rows(&classes, rows)?;
        Self::from_flat(classes, values)
    }

    pub fn classes(&self) -> &ClassList {
        &self.classes
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.values[row * self.n_classes() + col]
    }

    pub fn row(&self, row: usize) -> &[u8] {
        let c = self.n_classes();
        &self.values[row * c..(row + 1) * c]
    }

    pub fn column(&self, col: usize) -> Vec<u8> {
        self.values
            .iter()
            .skip(col)
            .step_by(self.n_classes())
            .copied()
            .collect()
    }

    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let values = gather_rows(&self.values, self.n_classes(), rows);
        Self::from_flat(self.classes.clone(), values)
    }
}

/// N x D matrix of finite real-valued input features.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    columns: ClassList,
    n_samples: usize,
    values: Vec<f64>,
}

impl FeatureMatrix {
    pub fn from_flat(columns: ClassList, values: Vec<f64>) -> Result<Self> {
        let n_samples = checked_rows(&columns, values.len())?;
        if let Some(idx) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: idx / columns.len() + 1,
                class: columns.0[idx % columns.len()].clone(),
                value: values[idx],
            });
        }
        Ok(Self {
            columns,
            n_samples,
            values,
        })
    }

    /// Column names `f0`, `f1`, ... for `n_features` columns.
    pub fn default_columns(n_features: usize) -> Result<ClassList> {
        ClassList::new((0..n_features).map(|i| format!("f{i}")))
    }

    pub fn columns(&self) -> &ClassList {
        &self.columns
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let d = self.n_features();
        &self.values[row * d..(row + 1) * d]
    }

    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let values = gather_rows(&self.values, self.n_features(), rows);
        Self::from_flat(self.columns.clone(), values)
    }
}

fn checked_rows(classes: &ClassList, len: usize) -> Result<usize> {
    if len == 0 {
        return Err(Error::NoSamples);
    }
    let c = classes.len();
    if !len.is_multiple_of(c) {
        return Err(Error::Shape {
            expected_rows: len / c + 1,
            expected_cols: c,
            found_rows: len / c,
            found_cols: c,
        });
    }
    Ok(len / c)
}

fn flatten_rows<T: Copy>(classes: &ClassList, rows: &[Vec<T>]) -> Result<Vec<T>> {
    let mut values = Vec::with_capacity(rows.len() * classes.len());
    for (i, row) in rows.iter().enumerate() {
        if row.len() != classes.len() {
            return Err(Error::RowLength {
                row: i + 1,
                expected: classes.len(),
                found: row.len(),
            });
        }
        values.extend_from_slice(row);
    }
    Ok(values)
}

fn gather_rows<T: Copy>(values: &[T], width: usize, rows: &[usize]) -> Vec<T> {
    let mut out = Vec::with_capacity(rows.len() * width);
    for &r in rows {
        out.extend_from_slice(&values[r * width..(r + 1) * width]);
    }
    out
}

/// Predictions from several models checked against one label matrix.
#[derive(Debug, Clone, Copy)]
pub struct AlignedSet<'a> {
    pub predictions: &'a [PredictionMatrix],
    pub labels: &'a LabelMatrix,
}

impl AlignedSet<'_> {
    pub fn classes(&self) -> &ClassList {
        self.labels.classes()
    }

    pub fn n_samples(&self) -> usize {
        self.labels.n_samples()
    }
}

/// Confirms every prediction matrix has the label matrix's sample count and
/// exactly its class list, in the same order.
///
/// Input indices in errors are 1-based positions in `predictions`.
pub fn align<'a>(
    predictions: &'a [PredictionMatrix],
    labels: &'a LabelMatrix,
) -> Result<AlignedSet<'a>> {
    if predictions.is_empty() {
        return Err(Error::NoPredictions);
    }
    for (i, pred) in predictions.iter().enumerate() {
        check_classes(i + 1, labels.classes(), pred.classes())?;
        if pred.n_samples() != labels.n_samples() {
            return Err(Error::SampleCount {
                input: i + 1,
                expected: labels.n_samples(),
                found: pred.n_samples(),
            });
        }
    }
    Ok(AlignedSet {
        predictions,
        labels,
    })
}

pub(crate) fn check_classes(input: usize, expected: &ClassList, found: &ClassList) -> Result<()> {
    if expected == found {
        return Ok(());
    }
    let permutation: Option<Vec<usize>> = if expected.len() == found.len() {
        expected.iter().map(|name| found.position(name)).collect()
    } else {
        None
    };
    match permutation {
        Some(permutation) => Err(Error::ClassOrder {
            input,
            expected: expected.0.clone(),
            found: found.0.clone(),
            permutation,
        }),
        None => Err(Error::ClassSet {
            input,
            expected: expected.0.clone(),
            found: found.0.clone(),
        }),
    }
}

/// Formats `x` with 17 significant digits, dropping trailing zeros.
///
/// Plain decimal notation is used for exponents in [-7, 20], scientific
/// notation otherwise. The output parses back to the identical `f64`.
pub fn format_f64(x: f64) -> String {
    if x == 0.0 {
        return if x.is_sign_negative() { "-0" } else { "0" }.to_string();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "NaN".to_string()
        } else if x > 0.0 {
            "inf".to_string()
        } else {
            "-inf".to_string()
        };
    }
    let sci = format!("{:.16e}", x.abs());
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    let digits: String = mantissa.chars().filter(|c| *c != '.').collect();
    let digits = digits.trim_end_matches('0');
    let sign = if x < 0.0 { "-" } else { "" };

    if !(-7..=20).contains(&exp) {
        let (lead, rest) = digits.split_at(1);
        return if rest.is_empty() {
            format!("{sign}{lead}e{exp}")
        } else {
            format!("{sign}{lead}.{rest}e{exp}")
        };
    }
    if exp < 0 {
        let zeros = "0".repeat((-exp - 1) as usize);
        return format!("{sign}0.{zeros}{digits}");
    }
    let int_len = exp as usize + 1;
    if digits.len() <= int_len {
        let pad = "0".repeat(int_len - digits.len());
        format!("{sign}{digits}{pad}")
    } else {
        let (int_part, frac) = digits.split_at(int_len);
        format!("{sign}{int_part}.{frac}")
    }
}

struct RawTable {
    header: ClassList,
    rows: Vec<Vec<String>>,
}

fn read_table<R: Read>(reader: R) -> Result<RawTable> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .quoting(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut records = csv.records();
    let header = match records.next() {
        Some(record) => record?,
        None => return Err(Error::MissingHeader),
    };
    let header = ClassList::new(header.iter())?;
    let mut rows = Vec::new();
    for (i, record) in records.enumerate() {
        let record = record?;
        if record.len() != header.len() {
            return Err(Error::RowLength {
                row: i + 1,
                expected: header.len(),
                found: record.len(),
            });
        }
        rows.push(record.iter().map(str::to_owned).collect());
    }
    if rows.is_empty() {
        return Err(Error::NoSamples);
    }
    Ok(RawTable { header, rows })
}

fn parse_reals(table: &RawTable) -> Result<Vec<f64>> {
    let mut values = Vec::with_capacity(table.rows.len() * table.header.len());
    for (i, row) in table.rows.iter().enumerate() {
        for (j, field) in row.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| Error::NonNumeric {
                row: i + 1,
                class: table.header.0[j].clone(),
                value: field.clone(),
            })?;
            values.push(v);
        }
    }
    Ok(values)
}

/// Parses a prediction CSV from any reader.
pub fn parse_predictions<R: Read>(reader: R) -> Result<PredictionMatrix> {
    let table = read_table(reader)?;
    let values = parse_reals(&table)?;
    PredictionMatrix::from_flat(table.header, values)
}

/// Parses a label CSV whose fields are exactly `0` or `1`.
pub fn parse_labels<R: Read>(reader: R) -> Result<LabelMatrix> {
    let table = read_table(reader)?;
    let mut values = Vec::with_capacity(table.rows.len() * table.header.len());
    for (i, row) in table.rows.iter().enumerate() {
        for (j, field) in row.iter().enumerate() {
            values.push(match field.as_str() {
                "0" => 0,
                "1" => 1,
                _ => {
                    return Err(Error::NonBinary {
                        row: i + 1,
                        class: table.header.0[j].clone(),
                        value: field.clone(),
                    })
                }
            });
        }
    }
    LabelMatrix::from_flat(table.header, values)
}

pub fn parse_features<R: Read>(reader: R) -> Result<FeatureMatrix> {
    let table = read_table(reader)?;
    let values = parse_reals(&table)?;
    FeatureMatrix::from_flat(table.header, values)
}

pub fn read_predictions(path: impl AsRef<Path>) -> Result<PredictionMatrix> {
    parse_predictions(File::open(path)?)
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<LabelMatrix> {
    parse_labels(File::open(path)?)
}

pub fn read_features(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    parse_features(File::open(path)?)
}

fn emit<W: Write, T>(
    mut out: W,
    header: &ClassList,
    values: &[T],
    fmt: impl Fn(&T) -> String,
) -> Result<()> {
    if values.is_empty() {
        return Err(Error::NoSamples);
    }
    writeln!(out, "{}", header.0.join(","))?;
    for row in values.chunks(header.len()) {
        let line: Vec<String> = row.iter().map(&fmt).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_predictions_to<W: Write>(m: &PredictionMatrix, out: W) -> Result<()> {
    emit(out, &m.classes, &m.values, |v| format_f64(*v))
}

pub fn write_labels_to<W: Write>(m: &LabelMatrix, out: W) -> Result<()> {
    emit(out, &m.classes, &m.values, |v| v.to_string())
}

pub fn write_features_to<W: Write>(m: &FeatureMatrix, out: W) -> Result<()> {
    emit(out, &m.columns, &m.values, |v| format_f64(*v))
}

pub fn write_predictions(m: &PredictionMatrix, path: impl AsRef<Path>) -> Result<()> {
    write_predictions_to(m, BufWriter::new(File::create(path)?))
}

pub fn write_labels(m: &LabelMatrix, path: impl AsRef<Path>) -> Result<()> {
    write_labels_to(m, BufWriter::new(File::create(path)?))
}

pub fn write_features(m: &FeatureMatrix, path: impl AsRef<Path>) -> Result<()> {
    write_features_to(m, BufWriter::new(File::create(path)?))
}
