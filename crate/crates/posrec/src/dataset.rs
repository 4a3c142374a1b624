//! Dataset directories: `edges.csv` plus `schema.json`, optionally with the
//! column files produced by loading them.

use std::fs;
use std::path::{Path, PathBuf};

use posrec_core::datagen::{generate_tree, GenConfig};
use posrec_core::oracle::OracleTable;
use posrec_core::plan::EDGES;
use posrec_core::{ColumnType, TableSchema, Value};
use serde::Serialize;

use crate::error::{PosrecError, Result};
use crate::storage::{column_path, read_schema, write_schema};

pub fn csv_path(dir: &Path) -> PathBuf {
    dir.join(format!("{EDGES}.csv"))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GenSummary {
    pub edge_count: usize,
    pub height: u32,
    pub bytes: u64,
}

/// Writes `edges.csv` and `schema.json` for `cfg` into `out_dir`.
pub fn write_dataset(cfg: &GenConfig, out_dir: &Path) -> Result<GenSummary> {
    let data = generate_tree(cfg, EDGES)?;
    fs::create_dir_all(out_dir).map_err(|e| PosrecError::io(out_dir, e))?;
    let csv = data.to_csv();
    let path = csv_path(out_dir);
    fs::write(&path, &csv).map_err(|e| PosrecError::io(&path, e))?;
    write_schema(out_dir, &data.schema)?;
    Ok(GenSummary { edge_count: data.edge_count(), height: data.height, bytes: csv.len() as u64 })
}

/// Whether every column file of the schema in `dir` exists.
pub fn is_loaded(dir: &Path, schema: &TableSchema) -> bool {
    schema.columns.iter().all(|f| column_path(dir, &f.name).is_file())
}

/// Reads `edges.csv` for the oracle. Shares no code with the columnar
/// loader: fields are split by hand and typed from the schema.
pub fn read_oracle_table(dir: &Path) -> Result<OracleTable> {
    let schema = read_schema(dir)?;
    let path = csv_path(dir);
    let text = fs::read_to_string(&path).map_err(|e| PosrecError::io(&path, e))?;
    let bad = |line: usize, message: String| PosrecError::Format { path: path.clone(), message: format!("line {line}: {message}") };
    let mut lines = text.lines();
    let header: Vec<String> = lines.next().unwrap_or("").split(',').map(str::to_string).collect();
    let expected: Vec<&str> = schema.columns.iter().map(|f| f.name.as_str()).collect();
    if header != expected {
        return Err(bad(1, format!("header {header:?} differs from schema {expected:?}")));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != schema.columns.len() {
            return Err(bad(i + 2, format!("{} fields, expected {}", fields.len(), schema.columns.len())));
        }
        let row = fields
            .iter()
            .zip(&schema.columns)
            .map(|(s, f)| match f.ty {
                ColumnType::Int32 => s.parse().map(Value::Int).map_err(|e| bad(i + 2, format!("`{s}`: {e}"))),
                ColumnType::Varchar { .. } => Ok(Value::Str(s.to_string())),
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(OracleTable { columns: header, rows })
}
