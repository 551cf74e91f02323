//! Datasets, delimited-file ingestion, standardization and stratified splitting.

use std::fmt;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Dense row-major matrix of `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

/// Feature matrices are plain matrices; the alias names the role.
pub type FeatureMatrix = Matrix;

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            values: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                got: values.len(),
            });
        }
        Ok(Self { rows, cols, values })
    }

    /// Builds a matrix from equal-length rows. An empty slice yields a `0 x cols` matrix.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R], cols: usize) -> Result<Self> {
        let mut values = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    got: r.len(),
                });
            }
            values.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            values,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[i * self.cols + j] = v;
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    pub fn push_row(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                got: row.len(),
            });
        }
        self.values.extend_from_slice(row);
        self.rows += 1;
        Ok(())
    }

    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut values = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            values.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: idx.len(),
            cols: self.cols,
            values,
        }
    }

    /// Stacks `other` below `self`.
    pub fn vstack(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                got: other.cols,
            });
        }
        let mut values = self.values.clone();
        values.extend_from_slice(&other.values);
        Ok(Matrix {
            rows: self.rows + other.rows,
            cols: self.cols,
            values,
        })
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn column_means(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.cols];
        for r in self.iter_rows() {
            for (acc, v) in m.iter_mut().zip(r) {
                *acc += v;
            }
        }
        let n = self.rows.max(1) as f64;
        m.iter_mut().for_each(|v| *v /= n);
        m
    }
}

#[inline]
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Binary class tag. The minor class is the positive class throughout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Major,
    Minor,
}

impl Label {
    pub fn is_minor(self) -> bool {
        self == Label::Minor
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Major => "M",
            Label::Minor => "m",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Column layout of an ingested file, kept so exports mirror the input.
#[derive(Clone, Debug, PartialEq)]
pub struct Schema {
    pub feature_names: Vec<String>,
    pub label_column: String,
    /// Position of the label column among all columns of the original header.
    pub label_position: usize,
    pub positive_token: String,
    pub delimiter: u8,
}

impl Schema {
    /// A schema for in-memory data: features `x1..xd`, trailing `class` column.
    pub fn synthetic(cols: usize) -> Self {
        Self {
            feature_names: (1..=cols).map(|j| format!("x{j}")).collect(),
            label_column: "class".into(),
            label_position: cols,
            positive_token: "m".into(),
            delimiter: b',',
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    pub features: Matrix,
    pub labels: Vec<Label>,
    /// Original label token per row; synthetic rows carry the positive token.
    pub tokens: Vec<String>,
    pub schema: Schema,
}

impl LabeledDataset {
    /// Builds a dataset with generated tokens (`m` for minor, `M` for major).
    pub fn new(features: Matrix, labels: Vec<Label>) -> Result<Self> {
        if labels.len() != features.rows() {
            return Err(Error::DimensionMismatch {
                expected: features.rows(),
                got: labels.len(),
            });
        }
        let tokens = labels.iter().map(|l| l.as_str().to_string()).collect();
        let schema = Schema::synthetic(features.cols());
        Ok(Self {
            features,
            labels,
            tokens,
            schema,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn count(&self, label: Label) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    pub fn indices_of(&self, label: Label) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i] == label).collect()
    }

    /// Minor-class size over major-class size.
    pub fn imbalance_ratio(&self) -> f64 {
        self.count(Label::Minor) as f64 / self.count(Label::Major) as f64
    }

    pub fn require_both_classes(&self) -> Result<()> {
        let minor = self.count(Label::Minor);
        if minor == 0 || minor == self.len() {
            return Err(Error::SingleClass(format!("{} minor of {} rows", minor, self.len())));
        }
        Ok(())
    }

    pub fn subset(&self, idx: &[usize]) -> LabeledDataset {
        LabeledDataset {
            features: self.features.select_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            tokens: idx.iter().map(|&i| self.tokens[i].clone()).collect(),
            schema: self.schema.clone(),
        }
    }

    /// Appends minor-labeled rows.
    pub fn with_minor_rows(&self, rows: &Matrix) -> Result<LabeledDataset> {
        let features = self.features.vstack(rows)?;
        let mut labels = self.labels.clone();
        labels.extend(std::iter::repeat_n(Label::Minor, rows.rows()));
        let mut tokens = self.tokens.clone();
        tokens.extend(std::iter::repeat_n(self.schema.positive_token.clone(), rows.rows()));
        Ok(LabeledDataset {
            features,
            labels,
            tokens,
            schema: self.schema.clone(),
        })
    }
}

fn detect_delimiter(header: &str) -> u8 {
    if header.contains('\t') {
        b'\t'
    } else {
        b','
    }
}

/// Parses delimited text (comma or tab, detected from the header line).
///
/// Rows whose label cell equals `positive_label` become [`Label::Minor`];
/// every other row is [`Label::Major`].
pub fn parse_delimited(text: &str, label_column: &str, positive_label: &str) -> Result<LabeledDataset> {
    let header = text
        .lines()
        .find(|l| !l.trim().is_empty())
        .ok_or(Error::Empty("no header row"))?;
    let delimiter = detect_delimiter(header);
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let headers = reader
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let label_position = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::MissingLabelColumn(label_column.to_string()))?;
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != label_position)
        .map(|(_, h)| h.to_string())
        .collect();
    let cols = feature_names.len();
    if cols == 0 {
        return Err(Error::Empty("no feature columns"));
    }

    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut tokens = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line() as usize).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.len() == 1 && record.get(0) == Some("") {
            continue;
        }
        if record.len() != headers.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected {} cells, found {}", headers.len(), record.len()),
            });
        }
        for (j, cell) in record.iter().enumerate() {
            if j == label_position {
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                line,
                message: format!("non-numeric feature cell `{cell}` in column `{}`", &headers[j]),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    message: format!("non-finite feature cell `{cell}`"),
                });
            }
            values.push(v);
        }
        let token = record[label_position].to_string();
        labels.push(if token == positive_label {
            Label::Minor
        } else {
            Label::Major
        });
        tokens.push(token);
    }
    if labels.is_empty() {
        return Err(Error::Empty("no data rows"));
    }
    let data = LabeledDataset {
        features: Matrix::from_vec(labels.len(), cols, values)?,
        labels,
        tokens,
        schema: Schema {
            feature_names,
            label_column: label_column.to_string(),
            label_position,
            positive_token: positive_label.to_string(),
            delimiter,
        },
    };
    data.require_both_classes()?;
    Ok(data)
}

pub fn load_delimited(path: impl AsRef<Path>, label_column: &str, positive_label: &str) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_delimited(&text, label_column, positive_label)
}

fn format_value(v: f64) -> String {
    // `{}` on f64 prints the shortest representation that round-trips.
    format!("{v}")
}

/// Writes a dataset in its ingestion layout. `extra` appends named columns
/// (for example a provenance tag) after the original ones.
pub fn write_delimited<W: Write>(out: W, data: &LabeledDataset, extra: &[(&str, &[String])]) -> std::io::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .delimiter(data.schema.delimiter)
        .from_writer(out);
    let total = data.dim() + 1;
    let mut names = data.schema.feature_names.iter();
    let mut record: Vec<String> = Vec::with_capacity(total + extra.len());
    for j in 0..total {
        if j == data.schema.label_position {
            record.push(data.schema.label_column.clone());
        } else {
            record.push(names.next().cloned().unwrap_or_default());
        }
    }
    record.extend(extra.iter().map(|(n, _)| n.to_string()));
    w.write_record(&record)?;
    for i in 0..data.len() {
        record.clear();
        let mut row = data.features.row(i).iter();
        for j in 0..total {
            if j == data.schema.label_position {
                record.push(data.tokens[i].clone());
            } else {
                record.push(format_value(*row.next().expect("row width matches schema")));
            }
        }
        record.extend(extra.iter().map(|(_, col)| col[i].clone()));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// Per-column affine standardization.
#[derive(Clone, Debug, PartialEq)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

pub const STD_FLOOR: f64 = 1e-12;

impl Standardizer {
    /// Fits population mean and standard deviation per column.
    pub fn fit(x: &Matrix) -> Self {
        let means = x.column_means();
        let mut vars = vec![0.0; x.cols()];
        for r in x.iter_rows() {
            for j in 0..x.cols() {
                let d = r[j] - means[j];
                vars[j] += d * d;
            }
        }
        let n = x.rows().max(1) as f64;
        let stds = vars.iter().map(|v| (v / n).sqrt().max(STD_FLOOR)).collect();
        Self { means, stds }
    }

    pub fn transform(&self, x: &Matrix) -> Matrix {
        let mut out = x.clone();
        for i in 0..out.rows() {
            for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                *v = (*v - self.means[j]) / self.stds[j];
            }
        }
        out
    }

    pub fn inverse_transform(&self, x: &Matrix) -> Matrix {
        let mut out = x.clone();
        for i in 0..out.rows() {
            for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                *v = *v * self.stds[j] + self.means[j];
            }
        }
        out
    }
}

pub fn standardize(data: &LabeledDataset) -> Result<(LabeledDataset, Standardizer)> {
    if data.len() < 2 {
        return Err(Error::TooFewRows {
            needed: 1,
            have: data.len(),
        });
    }
    let s = Standardizer::fit(&data.features);
    let mut out = data.clone();
    out.features = s.transform(&data.features);
    Ok((out, s))
}

/// Index-level stratified split: `(train, test)` row indices, each sorted.
pub fn stratified_split_indices(
    labels: &[Label],
    test_fraction: f64,
    rng: RngStream,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (k, label) in [Label::Major, Label::Minor].into_iter().enumerate() {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == label).collect();
        if idx.len() < 2 {
            return Err(Error::TooFewRows {
                needed: 1,
                have: idx.len(),
            });
        }
        let mut r = rng.substream(k as u64).rng();
        r.shuffle(&mut idx);
        let n_test = ((idx.len() as f64 * test_fraction).round() as usize).clamp(1, idx.len() - 1);
        test.extend_from_slice(&idx[..n_test]);
        train.extend_from_slice(&idx[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn stratified_split(
    data: &LabeledDataset,
    test_fraction: f64,
    rng: RngStream,
) -> Result<(LabeledDataset, LabeledDataset)> {
    let (train, test) = stratified_split_indices(&data.labels, test_fraction, rng)?;
    Ok((data.subset(&train), data.subset(&test)))
}
