//! Storage abstraction used by attribute readers.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::types::{ColumnData, TableSchema, Value};

/// Positional access to the columns of one immutable table.
pub trait ColumnSource: Send + Sync + fmt::Debug {
    fn schema(&self) -> &TableSchema;

    fn row_count(&self) -> usize;

    /// Appends the values of column `column` at `positions` to `out`, in
    /// order. `out` has the column's type.
    fn read_into(&self, column: usize, positions: &[u32], out: &mut ColumnData) -> Result<()>;

    fn name(&self) -> &str {
        &self.schema().table_name
    }
}

pub type TableRef = Arc<dyn ColumnSource>;

pub fn check_positions(positions: &[u32], row_count: usize) -> Result<()> {
    match positions.iter().find(|&&p| p as usize >= row_count) {
        Some(&p) => Err(Error::PositionOutOfRange { position: p as u64, row_count: row_count as u64 }),
        None => Ok(()),
    }
}

/// A fully in-memory table.
#[derive(Debug, Clone)]
pub struct MemTable {
    schema: TableSchema,
    columns: Vec<ColumnData>,
    rows: usize,
}

impl MemTable {
    pub fn from_rows(schema: TableSchema, rows: &[Vec<Value>]) -> Result<Self> {
        schema.validate()?;
        let mut columns: Vec<ColumnData> = schema
            .columns
            .iter()
            .map(|f| ColumnData::with_capacity(f.ty, rows.len()))
            .collect();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != columns.len() {
                return Err(Error::SchemaMismatch(format!(
                    "row {i} has {} values, schema has {} columns",
                    row.len(),
                    columns.len()
                )));
            }
            for (col, value) in columns.iter_mut().zip(row) {
                col.push(value)?;
            }
        }
        Ok(MemTable { schema, columns, rows: rows.len() })
    }

    pub fn into_ref(self) -> TableRef {
        Arc::new(self)
    }
}

impl ColumnSource for MemTable {
    fn schema(&self) -> &TableSchema {
        &self.schema
    }

    fn row_count(&self) -> usize {
        self.rows
    }

    fn read_into(&self, column: usize, positions: &[u32], out: &mut ColumnData) -> Result<()> {
        let data = self
            .columns
            .get(column)
            .ok_or_else(|| Error::UnknownColumn(format!("{}#{column}", self.schema.table_name)))?;
        check_positions(positions, self.rows)?;
        match (data, out) {
            (ColumnData::Int32(src), ColumnData::Int32(dst)) => {
                dst.extend(positions.iter().map(|&p| src[p as usize]));
            }
            (ColumnData::Varchar { width, bytes: src }, ColumnData::Varchar { bytes: dst, .. }) => {
                for &p in positions {
                    let p = p as usize;
                    dst.extend_from_slice(&src[p * width..(p + 1) * width]);
                }
            }
            _ => {
                return Err(Error::ExpressionTypeError(format!(
                    "output vector type does not match column {column}"
                )))
            }
        }
        Ok(())
    }
}
