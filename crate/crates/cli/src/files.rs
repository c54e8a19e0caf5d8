use std::collections::hash_map::RandomState;
use std::fs;
use std::hash::{BuildHasher, Hasher};
use std::path::Path;

use dgcca::{Error, Format, Result};
use serde::Serialize;

pub fn format_for(path: &Path, flag: Option<&str>) -> Result<Format> {
    match flag {
        Some(f) => Format::parse(f),
        None => Ok(Format::from_path(path)),
    }
}

pub fn extension(format: Format) -> &'static str {
    match format {
        Format::Csv => "csv",
        Format::Tsv => "tsv",
        Format::Binary => "bin",
    }
}

pub fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Seed from the flag, or a fresh one from the process-random hasher keys.
pub fn seed_or_generate(seed: Option<u64>) -> (u64, bool) {
    match seed {
        Some(s) => (s, false),
        None => {
            let mut h = RandomState::new().build_hasher();
            h.write_u64(std::process::id() as u64);
            (h.finish(), true)
        }
    }
}

/// Reads a list of labels: one per line or one per field, with an optional
/// header when there is exactly one extra entry.
pub fn read_labels(path: &Path, expected: usize) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut labels: Vec<String> = text
        .lines()
        .flat_map(|l| l.split([',', '\t']))
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect();
    if labels.len() == expected + 1 {
        labels.remove(0);
    }
    if labels.len() != expected {
        return Err(Error::Shape(format!(
            "{} labels in {} for {expected} samples",
            labels.len(),
            path.display()
        )));
    }
    Ok(labels)
}

/// Reads one numeric column of a delimited file. A first row that does not
/// parse is taken as a header.
pub fn read_vector(path: &Path, column: Option<&str>) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let delim = if Format::from_path(path) == Format::Tsv { b'\t' } else { b',' };
    let parse_err = |m: String| Error::Parse { path: path.display().to_string(), message: m };
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delim)
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let rows: Vec<csv::StringRecord> = rdr
        .records()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| parse_err(e.to_string()))?;
    let rows: Vec<&csv::StringRecord> = rows.iter().filter(|r| r.iter().any(|f| !f.trim().is_empty())).collect();
    let Some(first) = rows.first() else {
        return Err(Error::EmptyInput(format!("{} has no rows", path.display())));
    };
    let header = first.iter().last().is_some_and(|f| f.trim().parse::<f64>().is_err());
    let col = match column {
        Some(name) => {
            if !header {
                return Err(Error::Config(format!("--column given but {} has no header", path.display())));
            }
            first
                .iter()
                .position(|f| f.trim() == name)
                .ok_or_else(|| Error::Config(format!("no column '{name}' in {}", path.display())))?
        }
        None => first.len() - 1,
    };
    let body = if header { &rows[1..] } else { &rows[..] };
    body.iter()
        .enumerate()
        .map(|(i, r)| {
            let cell = r.get(col).ok_or_else(|| parse_err(format!("row {} has no column {col}", i + 1)))?;
            cell.trim()
                .parse::<f64>()
                .map_err(|_| parse_err(format!("row {}: '{cell}' is not a number", i + 1)))
        })
        .collect()
}
