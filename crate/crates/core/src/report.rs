//! Report envelope shared by all experiments, with CSV and JSON writers.
//!
//! Rows are ordered key-value records. The CSV header is the union of row
//! keys in order of first appearance; missing cells are empty. Floats are
//! written in shortest round-trip form, and non-finite values as `inf`,
//! `-inf` or `nan`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::Result;

pub const SCHEMA: &str = "catkappa-report/1";

pub type Row = Map<String, Value>;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub schema: String,
    pub experiment_id: String,
    pub parameters: Map<String, Value>,
    pub tolerances: Map<String, Value>,
    pub seed: u64,
    pub pass: bool,
    pub rows: Vec<Row>,
    /// Wall time; excluded from the reproducible CSV body.
    pub runtime_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
    Both,
}

/// JSON number, or a string for values JSON cannot represent.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        Value::from(x)
    } else if x.is_nan() {
        Value::from("nan")
    } else if x > 0.0 {
        Value::from("inf")
    } else {
        Value::from("-inf")
    }
}

/// Builds a [`Row`] from `key => value` pairs; `f64` values go through
/// [`num`].
#[macro_export]
macro_rules! row {
    ($($k:expr => $v:expr),* $(,)?) => {{
        let mut r = $crate::report::Row::new();
        $( r.insert($k.to_string(), $crate::report::IntoCell::into_cell($v)); )*
        r
    }};
}

pub trait IntoCell {
    fn into_cell(self) -> Value;
}

impl IntoCell for f64 {
    fn into_cell(self) -> Value {
        num(self)
    }
}

impl IntoCell for Option<f64> {
    fn into_cell(self) -> Value {
        self.map_or(Value::Null, num)
    }
}

macro_rules! cell_via_from {
    ($($t:ty),*) => {$(
        impl IntoCell for $t {
            fn into_cell(self) -> Value {
                Value::from(self)
            }
        }
    )*};
}

cell_via_from!(bool, u32, u64, usize, i64, String, &str);

impl IntoCell for Value {
    fn into_cell(self) -> Value {
        self
    }
}

fn cell_text(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

impl ExperimentReport {
    pub fn new(
        experiment_id: impl Into<String>,
        parameters: Map<String, Value>,
        tolerances: Map<String, Value>,
        seed: u64,
    ) -> Self {
        ExperimentReport {
            schema: SCHEMA.into(),
            experiment_id: experiment_id.into(),
            parameters,
            tolerances,
            seed,
            pass: true,
            rows: Vec::new(),
            runtime_ms: 0,
        }
    }

    pub fn header(&self) -> Vec<String> {
        let mut keys: Vec<String> = Vec::new();
        for row in &self.rows {
            for k in row.keys() {
                if !keys.contains(k) {
                    keys.push(k.clone());
                }
            }
        }
        keys
    }

    pub fn to_csv(&self) -> Result<String> {
        let header = self.header();
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&header)?;
        for row in &self.rows {
            w.write_record(header.iter().map(|k| row.get(k).map(cell_text).unwrap_or_default()))?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn file_stem(&self) -> String {
        format!("{}_seed{}", self.experiment_id, self.seed)
    }

    /// Writes `<experiment_id>_seed<seed>.csv` and/or `.json` into `dir`.
    pub fn write(&self, dir: &Path, format: OutputFormat) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        if matches!(format, OutputFormat::Csv | OutputFormat::Both) {
            let p = dir.join(format!("{}.csv", self.file_stem()));
            fs::write(&p, self.to_csv()?)?;
            written.push(p);
        }
        if matches!(format, OutputFormat::Json | OutputFormat::Both) {
            let p = dir.join(format!("{}.json", self.file_stem()));
            fs::write(&p, self.to_json()?)?;
            written.push(p);
        }
        Ok(written)
    }
}
