//! Tabular output in CSV and JSON.
//!
//! Floats are written in Rust's shortest round-trip form, so a value read
//! back from either format is bit-identical to the one emitted. JSON has no
//! literal for non-finite numbers; those are written as
//! `{"nonfinite": "inf" | "-inf" | "NaN"}`.

use serde_json::{json, Map, Value};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
    Empty,
}

impl Cell {
    fn to_csv_field(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => format!("{v:?}"),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Cell::Int(v) => json!(v),
            Cell::Float(v) if v.is_finite() => json!(v),
            Cell::Float(v) => json!({ "nonfinite": format!("{v:?}") }),
            Cell::Text(s) => json!(s),
            Cell::Empty => Value::Null,
        }
    }

    fn from_json(v: &Value) -> Result<Self, TableError> {
        match v {
            Value::Null => Ok(Cell::Empty),
            Value::String(s) => Ok(Cell::Text(s.clone())),
            Value::Number(n) => {
                if let Some(i) = n.as_i64() {
                    Ok(Cell::Int(i))
                } else if n.is_f64() {
                    Ok(Cell::Float(n.as_f64().expect("f64 number")))
                } else {
                    Err(TableError::Shape(format!("integer {n} out of range")))
                }
            }
            Value::Object(o) if o.len() == 1 => match o.get("nonfinite").and_then(Value::as_str) {
                Some("inf") => Ok(Cell::Float(f64::INFINITY)),
                Some("-inf") => Ok(Cell::Float(f64::NEG_INFINITY)),
                Some("NaN") => Ok(Cell::Float(f64::NAN)),
                _ => Err(TableError::Shape(format!("unexpected cell {v}"))),
            },
            other => Err(TableError::Shape(format!("unexpected cell {other}"))),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        i64::try_from(v).map(Cell::Int).unwrap_or(Cell::Float(v as f64))
    }
}

impl From<u32> for Cell {
    fn from(v: u32) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Int(v as i64)
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

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map(Into::into).unwrap_or(Cell::Empty)
    }
}

#[derive(Debug, Error)]
pub enum TableError {
    #[error("malformed table: {0}")]
    Shape(String),
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("CSV encoding failed: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the header");
        self.rows.push(row);
    }

    /// Header plus one record per row, LF line endings.
    pub fn to_csv(&self) -> Result<String, TableError> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::to_csv_field))?;
        }
        let bytes = w.into_inner().map_err(|e| TableError::Shape(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| TableError::Shape(e.to_string()))
    }

    /// `{"manifest": …, "columns": […], "rows": [[…], …]}` with a trailing
    /// newline.
    pub fn to_json(&self, manifest: &Value) -> String {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| Value::Array(r.iter().map(Cell::to_json).collect()))
            .collect();
        let mut obj = Map::new();
        obj.insert("manifest".into(), manifest.clone());
        obj.insert("columns".into(), json!(self.columns));
        obj.insert("rows".into(), Value::Array(rows));
        let mut s = serde_json::to_string_pretty(&Value::Object(obj)).expect("serializable");
        s.push('\n');
        s
    }

    /// Inverse of [`Table::to_json`]; returns the embedded manifest too.
    pub fn from_json(text: &str) -> Result<(Value, Table), TableError> {
        let v: Value = serde_json::from_str(text)?;
        let obj = v.as_object().ok_or_else(|| TableError::Shape("expected an object".into()))?;
        let columns: Vec<String> = obj
            .get("columns")
            .and_then(Value::as_array)
            .ok_or_else(|| TableError::Shape("missing columns".into()))?
            .iter()
            .map(|c| c.as_str().map(str::to_string).ok_or_else(|| TableError::Shape("column names must be strings".into())))
            .collect::<Result<_, _>>()?;
        let rows = obj
            .get("rows")
            .and_then(Value::as_array)
            .ok_or_else(|| TableError::Shape("missing rows".into()))?
            .iter()
            .map(|r| {
                let cells = r.as_array().ok_or_else(|| TableError::Shape("rows must be arrays".into()))?;
                if cells.len() != columns.len() {
                    return Err(TableError::Shape("row width differs from header".into()));
                }
                cells.iter().map(Cell::from_json).collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<_, _>>()?;
        let manifest = obj.get("manifest").cloned().unwrap_or(Value::Null);
        Ok((manifest, Table { columns, rows }))
    }
}
