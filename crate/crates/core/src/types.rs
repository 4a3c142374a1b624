//! Column types, schemas, scalar values and typed column vectors.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical type of a column. Every type has a fixed slot width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ColumnType {
    Int32,
    Varchar { max_len: u32 },
}

impl ColumnType {
    pub fn varchar(max_len: u32) -> Self {
        ColumnType::Varchar { max_len }
    }

    /// Bytes occupied by one value on disk and in tuple blocks.
    pub fn slot_width(&self) -> usize {
        match self {
            ColumnType::Int32 => 4,
            ColumnType::Varchar { max_len } => *max_len as usize,
        }
    }

    pub fn is_int(&self) -> bool {
        matches!(self, ColumnType::Int32)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ColumnType::Varchar { max_len: 0 } => {
                Err(Error::InvalidConfig("varchar max_len must be at least 1".to_string()))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for ColumnType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ColumnType::Int32 => f.write_str("int32"),
            ColumnType::Varchar { max_len } => write!(f, "varchar({max_len})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Field {
    pub name: String,
    #[serde(flatten)]
    pub ty: ColumnType,
}

impl Field {
    pub fn new(name: impl Into<String>, ty: ColumnType) -> Self {
        Field { name: name.into(), ty }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableSchema {
    pub table_name: String,
    pub columns: Vec<Field>,
}

impl TableSchema {
    /// Builds a schema, checking for at least one column, unique names and
    /// valid varchar widths.
    pub fn new(table_name: impl Into<String>, columns: Vec<Field>) -> Result<Self> {
        let schema = TableSchema { table_name: table_name.into(), columns };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        if self.columns.is_empty() {
            return Err(Error::InvalidConfig(format!(
                "table `{}` has no columns",
                self.table_name
            )));
        }
        for (i, field) in self.columns.iter().enumerate() {
            field.ty.validate()?;
            if self.columns[..i].iter().any(|f| f.name == field.name) {
                return Err(Error::InvalidConfig(format!(
                    "duplicate column `{}` in table `{}`",
                    field.name, self.table_name
                )));
            }
        }
        Ok(())
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|f| f.name == name)
    }

    pub fn column(&self, name: &str) -> Result<(usize, &Field)> {
        self.column_index(name)
            .map(|i| (i, &self.columns[i]))
            .ok_or_else(|| Error::UnknownColumn(format!("{}.{}", self.table_name, name)))
    }

    /// The edge-list layout used by all experiments: `id, from, to` as
    /// int32, `name` as varchar(15), then `c1..cN` as varchar(20).
    pub fn edges(table_name: &str, payload_cols: usize) -> Self {
        let mut columns = alloc::vec![
            Field::new("id", ColumnType::Int32),
            Field::new("from", ColumnType::Int32),
            Field::new("to", ColumnType::Int32),
            Field::new("name", ColumnType::varchar(NAME_MAX_LEN)),
        ];
        for i in 1..=payload_cols {
            columns.push(Field::new(payload_column(i), ColumnType::varchar(PAYLOAD_MAX_LEN)));
        }
        TableSchema { table_name: table_name.to_string(), columns }
    }
}

pub const NAME_MAX_LEN: u32 = 15;
pub const PAYLOAD_MAX_LEN: u32 = 20;

/// Name of the `i`-th (1-based) payload column.
pub fn payload_column(i: usize) -> String {
    format!("c{i}")
}

/// True for the generated `c<digits>` payload columns.
pub fn is_payload_column(name: &str) -> bool {
    name.len() > 1 && name.starts_with('c') && name[1..].bytes().all(|b| b.is_ascii_digit())
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Int(i32),
    Str(String),
}

impl Value {
    pub fn as_int(&self) -> Option<i32> {
        match self {
            Value::Int(v) => Some(*v),
            Value::Str(_) => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Str(s) => f.write_str(s),
        }
    }
}

/// A typed column vector. Varchar values live in fixed-width zero-padded
/// slots, the same layout as on disk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnData {
    Int32(Vec<i32>),
    Varchar { width: usize, bytes: Vec<u8> },
}

impl ColumnData {
    pub fn new(ty: ColumnType) -> Self {
        Self::with_capacity(ty, 0)
    }

    pub fn with_capacity(ty: ColumnType, rows: usize) -> Self {
        match ty {
            ColumnType::Int32 => ColumnData::Int32(Vec::with_capacity(rows)),
            ColumnType::Varchar { max_len } => ColumnData::Varchar {
                width: max_len as usize,
                bytes: Vec::with_capacity(rows * max_len as usize),
            },
        }
    }

    pub fn column_type(&self) -> ColumnType {
        match self {
            ColumnData::Int32(_) => ColumnType::Int32,
            ColumnData::Varchar { width, .. } => ColumnType::varchar(*width as u32),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            ColumnData::Int32(v) => v.len(),
            ColumnData::Varchar { width, bytes } => bytes.len() / width,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn ints(&self) -> Option<&[i32]> {
        match self {
            ColumnData::Int32(v) => Some(v),
            ColumnData::Varchar { .. } => None,
        }
    }

    /// The logical string at `row`: slot bytes up to the first zero byte.
    pub fn str_at(&self, row: usize) -> Option<&str> {
        match self {
            ColumnData::Varchar { width, bytes } => {
                let slot = &bytes[row * width..(row + 1) * width];
                Some(decode_slot(slot))
            }
            ColumnData::Int32(_) => None,
        }
    }

    pub fn value(&self, row: usize) -> Value {
        match self {
            ColumnData::Int32(v) => Value::Int(v[row]),
            ColumnData::Varchar { .. } => Value::Str(self.str_at(row).unwrap_or("").to_string()),
        }
    }

    /// Appends a value, checking type and varchar width.
    pub fn push(&mut self, value: &Value) -> Result<()> {
        match (self, value) {
            (ColumnData::Int32(v), Value::Int(x)) => {
                v.push(*x);
                Ok(())
            }
            (ColumnData::Varchar { width, bytes }, Value::Str(s)) => {
                let start = bytes.len();
                bytes.resize(start + *width, 0);
                let res = encode_slot(s, &mut bytes[start..]);
                if res.is_err() {
                    bytes.truncate(start);
                }
                res
            }
            (col, value) => Err(Error::ExpressionTypeError(format!(
                "cannot store {value:?} in a {} column",
                col.column_type()
            ))),
        }
    }

    /// Rows of `self` selected by `rows`, in that order.
    pub fn gather(&self, rows: &[u32]) -> ColumnData {
        match self {
            ColumnData::Int32(v) => ColumnData::Int32(rows.iter().map(|&r| v[r as usize]).collect()),
            ColumnData::Varchar { width, bytes } => {
                let mut out = Vec::with_capacity(rows.len() * width);
                for &r in rows {
                    let r = r as usize;
                    out.extend_from_slice(&bytes[r * width..(r + 1) * width]);
                }
                ColumnData::Varchar { width: *width, bytes: out }
            }
        }
    }

    /// Appends rows `range` of `other`, which must have the same type.
    pub fn extend_from(&mut self, other: &ColumnData, start: usize, end: usize) {
        match (self, other) {
            (ColumnData::Int32(dst), ColumnData::Int32(src)) => dst.extend_from_slice(&src[start..end]),
            (ColumnData::Varchar { width, bytes }, ColumnData::Varchar { width: w2, bytes: src })
                if width == w2 =>
            {
                bytes.extend_from_slice(&src[start * *width..end * *width])
            }
            (dst, src) => panic!(
                "column type mismatch: {} vs {}",
                dst.column_type(),
                src.column_type()
            ),
        }
    }

    pub fn slice(&self, start: usize, end: usize) -> ColumnData {
        let mut out = ColumnData::with_capacity(self.column_type(), end - start);
        out.extend_from(self, start, end);
        out
    }
}

/// Logical string stored in a zero-padded slot.
pub fn decode_slot(slot: &[u8]) -> &str {
    let end = slot.iter().position(|&b| b == 0).unwrap_or(slot.len());
    core::str::from_utf8(&slot[..end]).unwrap_or("")
}

/// Writes `s` into a zero-filled `slot`. Fails when `s` does not fit or
/// contains a zero byte (which would truncate it on read).
pub fn encode_slot(s: &str, slot: &mut [u8]) -> Result<()> {
    if s.len() > slot.len() {
        return Err(Error::ValueOverflow(format!(
            "`{s}` is {} bytes, slot holds {}",
            s.len(),
            slot.len()
        )));
    }
    if s.as_bytes().contains(&0) {
        return Err(Error::ValueOverflow(format!("`{s}` contains a NUL byte")));
    }
    slot[..s.len()].copy_from_slice(s.as_bytes());
    Ok(())
}
