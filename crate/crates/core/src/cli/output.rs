//! Tabular artifacts written as CSV and JSON.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Bool(bool),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl Cell {
    fn csv_text(&self, precision: Option<usize>) -> String {
        match self {
            Cell::Num(v) if v.is_nan() => "NaN".into(),
            Cell::Num(v) if v.is_infinite() => if *v > 0.0 { "inf" } else { "-inf" }.into(),
            Cell::Num(v) => match precision {
                Some(p) => format!("{:.*e}", p.saturating_sub(1), v),
                None => format!("{v:e}"),
            },
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(v) if v.is_finite() => Value::from(*v),
            Cell::Num(v) if v.is_nan() => Value::Null,
            Cell::Num(v) => Value::from(if *v > 0.0 { "inf" } else { "-inf" }),
            Cell::Int(v) => Value::from(*v),
            Cell::Text(s) => Value::from(s.clone()),
            Cell::Bool(b) => Value::from(*b),
        }
    }
}

/// A named table of rows sharing one header.
#[derive(Debug, Clone, PartialEq)]
pub struct Sheet {
    pub name: String,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Sheet {
    pub fn new(name: &str, headers: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            headers: headers.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.headers.len(), "row width for {}", self.name);
        self.rows.push(row);
    }

    pub fn column(&self, header: &str) -> Option<Vec<&Cell>> {
        let i = self.headers.iter().position(|h| h == header)?;
        Some(self.rows.iter().map(|r| &r[i]).collect())
    }

    pub fn to_csv(&self, precision: Option<usize>) -> Result<Vec<u8>> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(&self.headers).map_err(io_error)?;
        for row in &self.rows {
            writer
                .write_record(row.iter().map(|c| c.csv_text(precision)))
                .map_err(io_error)?;
        }
        writer.into_inner().map_err(|e| Error::Io(e.to_string()))
    }

    pub fn to_json(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|row| {
                    let map: Map<String, Value> = self
                        .headers
                        .iter()
                        .cloned()
                        .zip(row.iter().map(Cell::json))
                        .collect();
                    Value::Object(map)
                })
                .collect(),
        )
    }
}

fn io_error(e: impl std::fmt::Display) -> Error {
    Error::Io(e.to_string())
}

#[derive(Debug, Clone, Serialize)]
pub struct Artifact {
    pub file: String,
    pub rows: usize,
    pub bytes: usize,
}

pub fn write_bytes(dir: &Path, file: &str, bytes: &[u8]) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(io_error)?;
    let path = dir.join(file);
    fs::write(&path, bytes).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok(path)
}

pub fn pretty_json(value: &impl Serialize) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(io_error)?;
    bytes.push(b'\n');
    Ok(bytes)
}
