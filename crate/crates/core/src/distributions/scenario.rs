use crate::error::{DqError, Result};
use std::io::{Read, Write};
use std::path::Path;

const PROB_SUM_TOL: f64 = 1e-10;
const PROB_HEADER: &str = "prob";

/// Row probabilities of a scenario set.
#[derive(Debug, Clone, PartialEq)]
pub enum Probabilities {
    Uniform,
    Weighted(Vec<f64>),
}

/// `N x n` joint loss scenarios, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioMatrix {
    losses: Vec<f64>,
    rows: usize,
    cols: usize,
    probs: Probabilities,
    labels: Vec<String>,
}

fn default_labels(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("x{i}")).collect()
}

impl ScenarioMatrix {
    /// Equally likely scenarios from a row-major buffer with `cols` columns.
    pub fn from_row_major(cols: usize, losses: Vec<f64>) -> Result<Self> {
        if cols == 0 || losses.is_empty() || !losses.len().is_multiple_of(cols) {
            return Err(DqError::invalid(format!(
                "cannot shape {} values into rows of {cols}",
                losses.len()
            )));
        }
        if losses.iter().any(|v| !v.is_finite()) {
            return Err(DqError::invalid("scenario losses must be finite"));
        }
        let rows = losses.len() / cols;
        Ok(Self { losses, rows, cols, probs: Probabilities::Uniform, labels: default_labels(cols) })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(DqError::invalid("scenario rows have different lengths"));
        }
        Self::from_row_major(cols, rows.concat())
    }

    /// Builds a matrix from equal-length columns.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let cols = columns.len();
        let rows = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != rows) {
            return Err(DqError::invalid("scenario columns have different lengths"));
        }
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            data.extend(columns.iter().map(|c| c[i]));
        }
        Self::from_row_major(cols, data)
    }

    pub fn with_probabilities(mut self, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != self.rows {
            return Err(DqError::invalid(format!(
                "{} probabilities for {} scenarios",
                probs.len(),
                self.rows
            )));
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(DqError::invalid("scenario probabilities must be nonnegative"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PROB_SUM_TOL {
            return Err(DqError::invalid(format!("scenario probabilities sum to {total}, not 1")));
        }
        self.probs = Probabilities::Weighted(probs);
        Ok(self)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.cols {
            return Err(DqError::invalid("label count does not match column count"));
        }
        self.labels = labels;
        Ok(self)
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn n_cols(&self) -> usize {
        self.cols
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn probabilities(&self) -> &Probabilities {
        &self.probs
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self.probs, Probabilities::Uniform)
    }

    /// Probability of row `i`.
    pub fn prob(&self, i: usize) -> f64 {
        match &self.probs {
            Probabilities::Uniform => 1.0 / self.rows as f64,
            Probabilities::Weighted(p) => p[i],
        }
    }

    /// Row probabilities as an explicit vector, or `None` when uniform.
    pub fn weights(&self) -> Option<&[f64]> {
        match &self.probs {
            Probabilities::Uniform => None,
            Probabilities::Weighted(p) => Some(p),
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.losses[i * self.cols..(i + 1) * self.cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.losses.chunks_exact(self.cols)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn as_row_major(&self) -> &[f64] {
        &self.losses
    }

    /// Portfolio losses `S = X_1 + ... + X_n` per scenario.
    pub fn row_sums(&self) -> Vec<f64> {
        self.rows().map(|r| r.iter().sum()).collect()
    }

    /// Per-scenario losses of `w ⊙ X` summed, i.e. `w^T X`.
    pub fn weighted_sums(&self, w: &[f64]) -> Vec<f64> {
        self.rows().map(|r| r.iter().zip(w).map(|(x, wi)| x * wi).sum()).collect()
    }

    /// `w ⊙ X`.
    pub fn scale_columns(&self, w: &[f64]) -> Result<Self> {
        self.map_columns(w, |x, wi| x * wi)
    }

    /// `X + c`.
    pub fn shift_columns(&self, c: &[f64]) -> Result<Self> {
        self.map_columns(c, |x, ci| x + ci)
    }

    fn map_columns(&self, v: &[f64], f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if v.len() != self.cols {
            return Err(DqError::invalid("vector length does not match column count"));
        }
        let mut out = self.clone();
        for row in out.losses.chunks_exact_mut(self.cols) {
            for (x, vi) in row.iter_mut().zip(v) {
                *x = f(*x, *vi);
            }
        }
        if out.losses.iter().any(|x| !x.is_finite()) {
            return Err(DqError::invalid("column transform produced non-finite losses"));
        }
        Ok(out)
    }

    /// Equally likely rows `range`. Only meaningful for uniform matrices.
    pub(crate) fn row_block(&self, range: std::ops::Range<usize>) -> Self {
        let losses = self.losses[range.start * self.cols..range.end * self.cols].to_vec();
        Self {
            losses,
            rows: range.len(),
            cols: self.cols,
            probs: Probabilities::Uniform,
            labels: self.labels.clone(),
        }
    }

    /// Reads `x1,...,xn[,prob]` CSV with a header row.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let headers: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
        let has_prob = headers.last().is_some_and(|h| h.eq_ignore_ascii_case(PROB_HEADER));
        let cols = headers.len() - usize::from(has_prob);
        if cols == 0 {
            return Err(DqError::invalid("scenario CSV has no loss columns"));
        }
        let mut data = Vec::new();
        let mut probs = Vec::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record?;
            if record.len() != headers.len() {
                return Err(DqError::invalid(format!("row {} has {} fields", line + 1, record.len())));
            }
            for (k, field) in record.iter().enumerate() {
                let v: f64 = field.parse().map_err(|_| {
                    DqError::invalid(format!("row {}: cannot parse {field:?} as a number", line + 1))
                })?;
                if has_prob && k == cols {
                    probs.push(v);
                } else {
                    data.push(v);
                }
            }
        }
        let m = Self::from_row_major(cols, data)?.with_labels(headers[..cols].to_vec())?;
        if has_prob {
            m.with_probabilities(probs)
        } else {
            Ok(m)
        }
    }

    pub fn read_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    /// Writes CSV with round-trip decimal text; a `prob` column is added for
    /// weighted matrices.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header = self.labels.clone();
        if !self.is_uniform() {
            header.push(PROB_HEADER.to_owned());
        }
        wtr.write_record(&header)?;
        let mut record = Vec::with_capacity(header.len());
        for (i, row) in self.rows().enumerate() {
            record.clear();
            record.extend(row.iter().map(f64::to_string));
            if let Some(p) = self.weights() {
                record.push(p[i].to_string());
            }
            wtr.write_record(&record)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn write_csv_path(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}
