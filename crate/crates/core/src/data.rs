//! Datasets on the unit hypercube, parameter ranges and CSV/JSON ingestion.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Physical range of one input parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamRange {
    pub name: String,
    pub min: f64,
    pub max: f64,
}

impl ParamRange {
    pub fn new(name: impl Into<String>, min: f64, max: f64) -> Self {
        Self {
            name: name.into(),
            min,
            max,
        }
    }
}

/// Design points in `[0,1]^P` with scalar responses.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    inputs: Vec<Vec<f64>>,
    responses: Vec<f64>,
    ranges: Option<Vec<ParamRange>>,
}

impl Dataset {
    /// Builds a dataset from already-normalized inputs.
    pub fn new(inputs: Vec<Vec<f64>>, responses: Vec<f64>) -> Result<Self> {
        if inputs.is_empty() {
            return invalid("dataset needs at least one row");
        }
        if inputs.len() != responses.len() {
            return invalid(format!(
                "{} input rows but {} responses",
                inputs.len(),
                responses.len()
            ));
        }
        let dim = inputs[0].len();
        if dim == 0 {
            return invalid("inputs have zero columns");
        }
        for (row, x) in inputs.iter().enumerate() {
            if x.len() != dim {
                return invalid(format!("row {row} has {} columns, expected {dim}", x.len()));
            }
            for (col, &v) in x.iter().enumerate() {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::OutOfRange {
                        row,
                        col,
                        value: v,
                        min: 0.0,
                        max: 1.0,
                    });
                }
            }
        }
        if let Some(i) = responses.iter().position(|y| !y.is_finite()) {
            return invalid(format!("response at row {i} is not finite"));
        }
        Ok(Self {
            dim,
            inputs,
            responses,
            ranges: None,
        })
    }

    /// Evaluates `f` on each design point.
    pub fn from_fn(inputs: Vec<Vec<f64>>, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let responses = inputs.iter().map(|x| f(x)).collect();
        Self::new(inputs, responses)
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn input(&self, i: usize) -> &[f64] {
        &self.inputs[i]
    }

    pub fn responses(&self) -> &[f64] {
        &self.responses
    }

    pub fn ranges(&self) -> Option<&[ParamRange]> {
        self.ranges.as_deref()
    }

    pub fn response_mean(&self) -> f64 {
        self.responses.iter().sum::<f64>() / self.len() as f64
    }

    pub fn response_variance(&self) -> f64 {
        let m = self.response_mean();
        self.responses.iter().map(|y| (y - m).powi(2)).sum::<f64>() / self.len() as f64
    }

    /// Rows `idx`, in that order.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            dim: self.dim,
            inputs: idx.iter().map(|&i| self.inputs[i].clone()).collect(),
            responses: idx.iter().map(|&i| self.responses[i]).collect(),
            ranges: self.ranges.clone(),
        }
    }

    pub fn with_responses(&self, responses: Vec<f64>) -> Result<Dataset> {
        let mut d = Dataset::new(self.inputs.clone(), responses)?;
        d.ranges = self.ranges.clone();
        Ok(d)
    }

    /// Maps the unit-cube inputs back to physical units. Without ranges the
    /// inputs are returned unchanged.
    pub fn denormalized_inputs(&self) -> Vec<Vec<f64>> {
        match &self.ranges {
            None => self.inputs.clone(),
            Some(r) => self
                .inputs
                .iter()
                .map(|x| {
                    x.iter()
                        .zip(r)
                        .map(|(v, pr)| pr.min + v * (pr.max - pr.min))
                        .collect()
                })
                .collect(),
        }
    }

    /// Column names: range names if present, otherwise `x1..xP`.
    pub fn column_names(&self) -> Vec<String> {
        match &self.ranges {
            Some(r) => r.iter().map(|p| p.name.clone()).collect(),
            None => (1..=self.dim).map(|j| format!("x{j}")).collect(),
        }
    }

    /// Writes the dataset as `x1,...,xP,y` CSV (normalized inputs).
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(csv_io)?;
        let mut header: Vec<String> = (1..=self.dim).map(|j| format!("x{j}")).collect();
        header.push("y".into());
        w.write_record(&header).map_err(csv_io)?;
        for (x, y) in self.inputs.iter().zip(&self.responses) {
            let rec: Vec<String> = x.iter().chain(std::iter::once(y)).map(|v| v.to_string()).collect();
            w.write_record(&rec).map_err(csv_io)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Maps raw inputs to the unit cube column by column, `(x - min)/(max - min)`.
pub fn normalize_inputs(
    raw: &[Vec<f64>],
    responses: Vec<f64>,
    ranges: &[ParamRange],
) -> Result<Dataset> {
    for (col, r) in ranges.iter().enumerate() {
        if !(r.min < r.max) || !r.min.is_finite() || !r.max.is_finite() {
            return Err(Error::InvalidRange {
                col,
                name: r.name.clone(),
                min: r.min,
                max: r.max,
            });
        }
    }
    let mut inputs = Vec::with_capacity(raw.len());
    for (row, x) in raw.iter().enumerate() {
        if x.len() != ranges.len() {
            return invalid(format!(
                "row {row} has {} columns but {} ranges were given",
                x.len(),
                ranges.len()
            ));
        }
        let mut out = Vec::with_capacity(x.len());
        for (col, (&v, r)) in x.iter().zip(ranges).enumerate() {
            if !(r.min..=r.max).contains(&v) {
                return Err(Error::OutOfRange {
                    row,
                    col,
                    value: v,
                    min: r.min,
                    max: r.max,
                });
            }
            out.push(((v - r.min) / (r.max - r.min)).clamp(0.0, 1.0));
        }
        inputs.push(out);
    }
    let mut d = Dataset::new(inputs, responses)?;
    d.ranges = Some(ranges.to_vec());
    Ok(d)
}

/// Raw rows of an `x1,...,xP,y` CSV file.
#[derive(Debug, Clone)]
pub struct RawTable {
    pub header: Vec<String>,
    pub inputs: Vec<Vec<f64>>,
    pub responses: Vec<f64>,
}

/// Reads a CSV whose last column is the response. Lines starting with `#`
/// are comments. Errors carry the 1-based line number.
pub fn read_csv(path: &Path) -> Result<RawTable> {
    let text = std::fs::read_to_string(path)?;
    parse_csv(&text)
}

pub fn parse_csv(text: &str) -> Result<RawTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            msg: e.to_string(),
        })?
        .iter()
        .map(str::to_owned)
        .collect();
    if header.len() < 2 {
        return Err(Error::Parse {
            line: 1,
            msg: "need at least one input column and a response column".into(),
        });
    }
    if header.last().map(String::as_str) != Some("y") {
        return Err(Error::Parse {
            line: 1,
            msg: format!("last column must be `y`, found `{}`", header.last().unwrap()),
        });
    }
    let p = header.len() - 1;
    let mut inputs = Vec::new();
    let mut responses = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            msg: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != p + 1 {
            return Err(Error::Parse {
                line,
                msg: format!("expected {} fields, found {}", p + 1, rec.len()),
            });
        }
        let mut vals = Vec::with_capacity(p + 1);
        for field in rec.iter() {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                line,
                msg: format!("`{field}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    msg: format!("`{field}` is not finite"),
                });
            }
            vals.push(v);
        }
        responses.push(vals.pop().unwrap());
        inputs.push(vals);
    }
    if inputs.is_empty() {
        return Err(Error::Parse {
            line: 1,
            msg: "no data rows".into(),
        });
    }
    Ok(RawTable {
        header,
        inputs,
        responses,
    })
}

/// Reads a JSON array of `{name, min, max}`.
pub fn read_ranges(path: &Path) -> Result<Vec<ParamRange>> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Loads a CSV, normalizing with `ranges` when given; without ranges the
/// inputs must already lie in `[0,1]`.
pub fn load_dataset(csv_path: &Path, ranges: Option<&[ParamRange]>) -> Result<Dataset> {
    let raw = read_csv(csv_path)?;
    match ranges {
        Some(r) => normalize_inputs(&raw.inputs, raw.responses, r),
        None => Dataset::new(raw.inputs, raw.responses),
    }
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}
