//! Loading, validating, centering and saving view matrices.
//!
//! Views are stored variables-by-samples (p rows, n columns). Text files may
//! carry a header row of sample ids and a leading column of variable names;
//! both are detected by whether the cells parse as numbers.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub const BINARY_MAGIC: &[u8; 6] = b"DGCCA1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Tsv,
    Binary,
}

impl Format {
    /// Guess from the file extension; anything unknown is treated as CSV.
    pub fn from_path(path: &Path) -> Format {
        match path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .as_deref()
        {
            Some("tsv") | Some("tab") | Some("txt") => Format::Tsv,
            Some("bin") | Some("dgcca") => Format::Binary,
            _ => Format::Csv,
        }
    }

    pub fn parse(s: &str) -> Result<Format> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "tsv" => Ok(Format::Tsv),
            "bin" | "binary" => Ok(Format::Binary),
            other => Err(Error::Config(format!("unknown matrix format '{other}'"))),
        }
    }
}

/// A dense view matrix with optional labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub values: DMatrix<f64>,
    pub row_labels: Option<Vec<String>>,
    pub col_labels: Option<Vec<String>>,
}

impl Matrix {
    /// Wraps values after checking finiteness and `p >= 1, n >= 2`.
    pub fn new(values: DMatrix<f64>) -> Result<Matrix> {
        check_values(&values)?;
        Ok(Matrix {
            values,
            row_labels: None,
            col_labels: None,
        })
    }

    pub fn with_labels(
        values: DMatrix<f64>,
        row_labels: Option<Vec<String>>,
        col_labels: Option<Vec<String>>,
    ) -> Result<Matrix> {
        check_values(&values)?;
        if let Some(r) = &row_labels {
            if r.len() != values.nrows() {
                return Err(Error::Shape(format!(
                    "{} row labels for {} rows",
                    r.len(),
                    values.nrows()
                )));
            }
        }
        if let Some(c) = &col_labels {
            if c.len() != values.ncols() {
                return Err(Error::Shape(format!(
                    "{} column labels for {} columns",
                    c.len(),
                    values.ncols()
                )));
            }
        }
        Ok(Matrix {
            values,
            row_labels,
            col_labels,
        })
    }

    pub fn p(&self) -> usize {
        self.values.nrows()
    }

    pub fn n(&self) -> usize {
        self.values.ncols()
    }
}

fn check_values(values: &DMatrix<f64>) -> Result<()> {
    if values.nrows() == 0 || values.ncols() == 0 {
        return Err(Error::EmptyInput("matrix has no entries".into()));
    }
    if values.ncols() < 2 {
        return Err(Error::Shape(format!(
            "need at least 2 samples (columns), got {}",
            values.ncols()
        )));
    }
    if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
        let (r, c) = (pos % values.nrows(), pos / values.nrows());
        return Err(Error::DegenerateInput(format!(
            "non-finite entry at row {r}, column {c}"
        )));
    }
    Ok(())
}

/// K row-centered views on the same n samples.
#[derive(Debug, Clone)]
pub struct MultiViewDataset {
    pub views: Vec<Matrix>,
    pub n: usize,
}

impl MultiViewDataset {
    pub fn k(&self) -> usize {
        self.views.len()
    }
}

/// Subtracts each row's mean. Rows that are already centered to within the
/// tolerance are left untouched, which makes the operation idempotent.
pub fn row_center(m: &Matrix) -> Matrix {
    let mut out = m.clone();
    let n = m.n() as f64;
    for mut row in out.values.row_iter_mut() {
        let sum: f64 = row.iter().sum();
        let max_abs = row.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if sum.abs() <= centering_tolerance(n, max_abs) {
            continue;
        }
        let mean = sum / n;
        for v in row.iter_mut() {
            *v -= mean;
        }
    }
    out
}

/// Absolute tolerance on a row sum for it to count as centered.
pub fn centering_tolerance(n: f64, row_max_abs: f64) -> f64 {
    1e-8 * n * row_max_abs
}

pub fn is_centered(m: &Matrix) -> bool {
    let n = m.n() as f64;
    m.values.row_iter().all(|row| {
        let sum: f64 = row.iter().sum();
        let max_abs = row.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        sum.abs() <= centering_tolerance(n, max_abs)
    })
}

pub fn assemble_dataset(views: Vec<Matrix>) -> Result<MultiViewDataset> {
    if views.len() < 2 {
        return Err(Error::Arity(format!(
            "need at least 2 views, got {}",
            views.len()
        )));
    }
    let n = views[0].n();
    for (k, v) in views.iter().enumerate() {
        if v.n() != n {
            return Err(Error::Shape(format!(
                "view {k} has {} samples, view 0 has {n}",
                v.n()
            )));
        }
    }
    let views = views.iter().map(row_center).collect();
    Ok(MultiViewDataset { views, n })
}

pub fn load_matrix(path: &Path, format: Format) -> Result<Matrix> {
    match format {
        Format::Binary => {
            let f = File::open(path).map_err(|e| Error::io(path, e))?;
            let mut buf = Vec::new();
            BufReader::new(f)
                .read_to_end(&mut buf)
                .map_err(|e| Error::io(path, e))?;
            decode_binary(&buf, &path.display().to_string())
        }
        Format::Csv | Format::Tsv => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let delim = if format == Format::Tsv { b'\t' } else { b',' };
            parse_delimited(&text, delim, &path.display().to_string())
        }
    }
}

fn parse_cell(s: &str) -> Option<f64> {
    // f64::from_str is locale independent and accepts scientific notation.
    let v: f64 = s.trim().parse().ok()?;
    Some(v)
}

/// Parses delimited text. `origin` is only used in error messages.
pub fn parse_delimited(text: &str, delimiter: u8, origin: &str) -> Result<Matrix> {
    let perr = |message: String| Error::Parse {
        path: origin.to_string(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<String>> = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| perr(e.to_string()))?;
        if rec.len() == 1 && rec.get(0).map(|c| c.is_empty()).unwrap_or(true) {
            continue;
        }
        rows.push(rec.iter().map(str::to_string).collect());
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput(format!("{origin} contains no data")));
    }

    // A header row is present when any cell past the first fails to parse.
    let has_header = rows[0].iter().skip(1).any(|c| parse_cell(c).is_none());
    let body_start = usize::from(has_header);
    if rows.len() == body_start {
        return Err(Error::EmptyInput(format!("{origin} has a header but no data")));
    }
    // A label column is present when any first cell of the body fails to parse.
    let has_label_col = rows[body_start..]
        .iter()
        .any(|r| r.first().map(|c| parse_cell(c).is_none()).unwrap_or(false));

    let width = rows[body_start].len();
    for (i, r) in rows.iter().enumerate() {
        if r.len() != width {
            return Err(perr(format!(
                "row {} has {} fields, expected {width}",
                i + 1,
                r.len()
            )));
        }
    }
    let skip = usize::from(has_label_col);
    let n = width - skip;
    let p = rows.len() - body_start;
    if n == 0 {
        return Err(Error::EmptyInput(format!("{origin} has no numeric columns")));
    }
    let mut data = Vec::with_capacity(p * n);
    let mut row_labels = Vec::new();
    for (i, r) in rows[body_start..].iter().enumerate() {
        if has_label_col {
            row_labels.push(r[0].clone());
        }
        for (j, cell) in r[skip..].iter().enumerate() {
            let v = parse_cell(cell).ok_or_else(|| {
                perr(format!(
                    "non-numeric cell '{cell}' at row {}, column {}",
                    i + body_start + 1,
                    j + skip + 1
                ))
            })?;
            data.push(v);
        }
    }
    let col_labels = has_header.then(|| rows[0][skip..].to_vec());
    let values = DMatrix::from_row_slice(p, n, &data);
    Matrix::with_labels(values, has_label_col.then_some(row_labels), col_labels)
}

pub fn decode_binary(buf: &[u8], origin: &str) -> Result<Matrix> {
    let perr = |message: String| Error::Parse {
        path: origin.to_string(),
        message,
    };
    if buf.is_empty() {
        return Err(Error::EmptyInput(format!("{origin} is empty")));
    }
    if buf.len() < 22 || &buf[..6] != BINARY_MAGIC {
        return Err(perr("missing DGCCA1 header".into()));
    }
    let p = u64::from_le_bytes(buf[6..14].try_into().unwrap()) as usize;
    let n = u64::from_le_bytes(buf[14..22].try_into().unwrap()) as usize;
    let expected = p
        .checked_mul(n)
        .and_then(|c| c.checked_mul(8))
        .ok_or_else(|| perr("dimensions overflow".into()))?;
    let body = &buf[22..];
    if body.len() != expected {
        return Err(perr(format!(
            "expected {expected} payload bytes for {p}x{n}, found {}",
            body.len()
        )));
    }
    if p == 0 || n == 0 {
        return Err(Error::EmptyInput(format!("{origin} declares a {p}x{n} matrix")));
    }
    let data: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Matrix::new(DMatrix::from_row_slice(p, n, &data))
}

pub fn encode_binary(m: &DMatrix<f64>) -> Vec<u8> {
    let (p, n) = m.shape();
    let mut out = Vec::with_capacity(22 + 8 * p * n);
    out.extend_from_slice(BINARY_MAGIC);
    out.extend_from_slice(&(p as u64).to_le_bytes());
    out.extend_from_slice(&(n as u64).to_le_bytes());
    for i in 0..p {
        for j in 0..n {
            out.extend_from_slice(&m[(i, j)].to_le_bytes());
        }
    }
    out
}

/// Writes a matrix. Text output uses Rust's shortest round-trip float
/// formatting, so reloading gives back identical bits.
pub fn save_matrix(m: &Matrix, path: &Path, format: Format) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    match format {
        Format::Binary => w
            .write_all(&encode_binary(&m.values))
            .map_err(|e| Error::io(path, e))?,
        Format::Csv | Format::Tsv => {
            let delim = if format == Format::Tsv { b'\t' } else { b',' };
            let mut cw = csv::WriterBuilder::new().delimiter(delim).from_writer(w);
            let csv_err = |e: csv::Error| Error::io(path, std::io::Error::other(e.to_string()));
            if let Some(cols) = &m.col_labels {
                let mut header = Vec::with_capacity(cols.len() + 1);
                if m.row_labels.is_some() {
                    header.push("variable".to_string());
                }
                header.extend(cols.iter().cloned());
                cw.write_record(&header).map_err(csv_err)?;
            }
            for i in 0..m.p() {
                let mut rec = Vec::with_capacity(m.n() + 1);
                if let Some(rows) = &m.row_labels {
                    rec.push(rows[i].clone());
                }
                rec.extend(m.values.row(i).iter().map(|v| format!("{v:?}")));
                cw.write_record(&rec).map_err(csv_err)?;
            }
            cw.flush().map_err(|e| Error::io(path, e))?;
            return Ok(());
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}
