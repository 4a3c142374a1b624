//! Intermediate representations exchanged between operators.
//!
//! A [`PositionBlock`] is a generalized join index: one position array per
//! covered table, all of equal length, where row `i` across the arrays
//! names one joined tuple. A [`TupleBlock`] holds materialized values.
//! Both keep their payload behind `Arc`s, so cloning a block shares it.

use alloc::format;
use alloc::rc::Rc;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::cell::Cell;

use crate::error::{Error, Result};
use crate::expr::Computed;
use crate::metrics::QueryMetrics;
use crate::source::TableRef;
use crate::types::{ColumnData, ColumnType, Field, Value};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PositionBlock {
    tables: Arc<[String]>,
    positions: Vec<Arc<Vec<u32>>>,
    len: usize,
}

impl PositionBlock {
    pub fn new(tables: Vec<String>, positions: Vec<Vec<u32>>) -> Result<Self> {
        if tables.len() != positions.len() || tables.is_empty() {
            return Err(Error::SchemaMismatch(format!(
                "{} tables but {} position arrays",
                tables.len(),
                positions.len()
            )));
        }
        let len = positions[0].len();
        if positions.iter().any(|p| p.len() != len) {
            return Err(Error::SchemaMismatch("position arrays differ in length".to_string()));
        }
        Ok(PositionBlock {
            tables: tables.into(),
            positions: positions.into_iter().map(Arc::new).collect(),
            len,
        })
    }

    /// A block covering exactly one table.
    pub fn single(table: impl Into<String>, positions: Vec<u32>) -> Self {
        let len = positions.len();
        PositionBlock {
            tables: alloc::vec![table.into()].into(),
            positions: alloc::vec![Arc::new(positions)],
            len,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn tables(&self) -> &[String] {
        &self.tables
    }

    pub fn slot_of(&self, table: &str) -> Option<usize> {
        self.tables.iter().position(|t| t == table)
    }

    /// True when the block covers `table` and nothing else.
    pub fn covers_only(&self, table: &str) -> bool {
        self.tables.len() == 1 && self.tables[0] == table
    }

    pub fn positions(&self, slot: usize) -> &[u32] {
        &self.positions[slot]
    }

    /// Rows `start..end` as a new block.
    pub fn slice(&self, start: usize, end: usize) -> Self {
        PositionBlock {
            tables: self.tables.clone(),
            positions: self.positions.iter().map(|p| Arc::new(p[start..end].to_vec())).collect(),
            len: end - start,
        }
    }

    /// Concatenates blocks covering the same tables.
    pub fn concat(blocks: &[PositionBlock]) -> Result<Self> {
        let first = blocks
            .first()
            .ok_or_else(|| Error::SchemaMismatch("nothing to concatenate".to_string()))?;
        let mut positions: Vec<Vec<u32>> = alloc::vec![Vec::new(); first.tables.len()];
        for b in blocks {
            if b.tables != first.tables {
                return Err(Error::TableMismatch(format!(
                    "{:?} vs {:?}",
                    b.tables, first.tables
                )));
            }
            for (dst, src) in positions.iter_mut().zip(&b.positions) {
                dst.extend_from_slice(src);
            }
        }
        PositionBlock::new(first.tables.to_vec(), positions)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TupleBlock {
    schema: Arc<[Field]>,
    columns: Vec<Arc<ColumnData>>,
    len: usize,
}

impl TupleBlock {
    pub fn new(schema: Arc<[Field]>, columns: Vec<ColumnData>) -> Result<Self> {
        Self::from_shared(schema, columns.into_iter().map(Arc::new).collect())
    }

    /// Like [`TupleBlock::new`] but reuses already shared column vectors.
    pub fn from_shared(schema: Arc<[Field]>, columns: Vec<Arc<ColumnData>>) -> Result<Self> {
        if schema.len() != columns.len() {
            return Err(Error::SchemaMismatch(format!(
                "{} fields but {} column vectors",
                schema.len(),
                columns.len()
            )));
        }
        let len = columns.first().map_or(0, |c| c.len());
        for (field, col) in schema.iter().zip(&columns) {
            if col.len() != len {
                return Err(Error::SchemaMismatch("column vectors differ in length".to_string()));
            }
            if col.column_type() != field.ty {
                return Err(Error::ExpressionTypeError(format!(
                    "column `{}` declared {} but holds {}",
                    field.name,
                    field.ty,
                    col.column_type()
                )));
            }
        }
        Ok(TupleBlock { schema, columns, len })
    }

    pub fn empty(schema: Arc<[Field]>) -> Self {
        let columns = schema.iter().map(|f| Arc::new(ColumnData::new(f.ty))).collect();
        TupleBlock { schema, columns, len: 0 }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn schema(&self) -> &Arc<[Field]> {
        &self.schema
    }

    pub fn columns(&self) -> &[Arc<ColumnData>] {
        &self.columns
    }

    pub fn column(&self, i: usize) -> &ColumnData {
        &self.columns[i]
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.schema
            .iter()
            .position(|f| f.name == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    pub fn row(&self, i: usize) -> Vec<Value> {
        self.columns.iter().map(|c| c.value(i)).collect()
    }

    pub fn rows(&self) -> Vec<Vec<Value>> {
        (0..self.len).map(|i| self.row(i)).collect()
    }

    /// Rows selected by `rows`, in that order.
    pub fn select(&self, rows: &[u32]) -> TupleBlock {
        TupleBlock {
            schema: self.schema.clone(),
            columns: self.columns.iter().map(|c| Arc::new(c.gather(rows))).collect(),
            len: rows.len(),
        }
    }

    pub fn slice(&self, start: usize, end: usize) -> TupleBlock {
        TupleBlock {
            schema: self.schema.clone(),
            columns: self.columns.iter().map(|c| Arc::new(c.slice(start, end))).collect(),
            len: end - start,
        }
    }

    /// Whether two schemas line up column by column (names and types).
    pub fn same_schema(a: &[Field], b: &[Field]) -> bool {
        a == b
    }
}

/// Reads one attribute of one table for the rows of position blocks.
#[derive(Debug, Clone)]
pub struct AttributeReader {
    table: TableRef,
    column: usize,
    field: Field,
    slot: usize,
    values_read: Rc<Cell<u64>>,
}

impl AttributeReader {
    /// A reader for `table.column` addressing slot `slot` of incoming blocks.
    pub fn new(table: TableRef, column: &str, slot: usize, metrics: &QueryMetrics) -> Result<Self> {
        let (index, field) = table.schema().column(column)?;
        let field = field.clone();
        let values_read = metrics.values_read_counter(table.name(), column);
        Ok(AttributeReader { table, column: index, field, slot, values_read })
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn table_name(&self) -> &str {
        self.table.name()
    }

    /// One value per block row, in row order.
    pub fn fetch(&self, block: &PositionBlock) -> Result<ColumnData> {
        let covered = block.tables().get(self.slot).map(String::as_str);
        if covered != Some(self.table.name()) {
            return Err(Error::TableNotCovered(self.table.name().to_string()));
        }
        let positions = block.positions(self.slot);
        let mut out = ColumnData::with_capacity(self.field.ty, positions.len());
        self.table.read_into(self.column, positions, &mut out)?;
        self.values_read.set(self.values_read.get() + positions.len() as u64);
        Ok(out)
    }
}

/// Converts position blocks into tuple blocks: one output column per reader
/// followed by one per computed expression.
#[derive(Debug, Clone)]
pub struct Materializer {
    readers: Vec<AttributeReader>,
    computed: Vec<Computed>,
    fetched_schema: Vec<Field>,
    out_schema: Arc<[Field]>,
    metrics: Rc<QueryMetrics>,
}

impl Materializer {
    pub fn new(
        readers: Vec<AttributeReader>,
        computed: Vec<Computed>,
        metrics: Rc<QueryMetrics>,
    ) -> Result<Self> {
        let fetched_schema: Vec<Field> = readers.iter().map(|r| r.field.clone()).collect();
        let mut out: Vec<Field> = fetched_schema.clone();
        for c in &computed {
            let ty: ColumnType = c.expr.result_type(&fetched_schema)?;
            out.push(Field::new(c.name.clone(), ty));
        }
        for (i, f) in out.iter().enumerate() {
            if out[..i].iter().any(|g| g.name == f.name) {
                return Err(Error::SchemaMismatch(format!("duplicate output column `{}`", f.name)));
            }
        }
        Ok(Materializer { readers, computed, fetched_schema, out_schema: out.into(), metrics })
    }

    pub fn out_schema(&self) -> &Arc<[Field]> {
        &self.out_schema
    }

    pub fn materialize(&self, block: &PositionBlock) -> Result<TupleBlock> {
        let mut columns = Vec::with_capacity(self.out_schema.len());
        for reader in &self.readers {
            columns.push(reader.fetch(block)?);
        }
        for c in &self.computed {
            let col = c.expr.eval(&self.fetched_schema, &columns[..self.readers.len()], block.len())?;
            columns.push(col);
        }
        self.metrics.add_rows_materialized(block.len() as u64);
        TupleBlock::new(self.out_schema.clone(), columns)
    }
}

/// Materializes `block` with the given attribute readers and computed columns.
pub fn materialize_positions(
    block: &PositionBlock,
    attrs: &[AttributeReader],
    computed: &[Computed],
    metrics: &Rc<QueryMetrics>,
) -> Result<TupleBlock> {
    Materializer::new(attrs.to_vec(), computed.to_vec(), metrics.clone())?.materialize(block)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;
    use crate::source::MemTable;
    use crate::types::TableSchema;
    use alloc::vec;

    fn fixture() -> TableRef {
        let schema = TableSchema::new(
            "edges",
            vec![
                Field::new("id", ColumnType::Int32),
                Field::new("from", ColumnType::Int32),
                Field::new("to", ColumnType::Int32),
            ],
        )
        .unwrap();
        let rows: Vec<Vec<Value>> = [(0, 0, 1), (1, 0, 2), (2, 1, 3)]
            .iter()
            .map(|&(a, b, c)| vec![Value::Int(a), Value::Int(b), Value::Int(c)])
            .collect();
        MemTable::from_rows(schema, &rows).unwrap().into_ref()
    }

    #[test]
    fn block_arrays_must_align() {
        assert!(PositionBlock::new(vec!["a".into(), "b".into()], vec![vec![0], vec![0, 1]]).is_err());
        let b = PositionBlock::new(vec!["a".into(), "b".into()], vec![vec![0, 1], vec![1, 0]]).unwrap();
        assert_eq!(b.len(), 2);
        assert_eq!(b.slot_of("b"), Some(1));
        assert!(!b.covers_only("a"));
    }

    #[test]
    fn reader_fetch_examples() {
        let m = QueryMetrics::new();
        let t = fixture();
        let to = AttributeReader::new(t.clone(), "to", 0, &m).unwrap();
        assert_eq!(to.fetch(&PositionBlock::single("edges", vec![0, 1])).unwrap().ints().unwrap(), &[1, 2]);
        assert!(to.fetch(&PositionBlock::single("edges", vec![])).unwrap().is_empty());
        let from = AttributeReader::new(t, "from", 0, &m).unwrap();
        assert_eq!(from.fetch(&PositionBlock::single("edges", vec![2, 2])).unwrap().ints().unwrap(), &[1, 1]);
        assert_eq!(m.values_read("edges", "to"), 2);
        assert_eq!(m.values_read("edges", "from"), 2);
    }

    #[test]
    fn reader_rejects_uncovered_table() {
        let m = QueryMetrics::new();
        let r = AttributeReader::new(fixture(), "id", 0, &m).unwrap();
        let err = r.fetch(&PositionBlock::single("other", vec![0])).unwrap_err();
        assert_eq!(err, Error::TableNotCovered("edges".into()));
    }

    #[test]
    fn materialize_examples() {
        let m = QueryMetrics::new();
        let t = fixture();
        let attrs = vec![
            AttributeReader::new(t.clone(), "id", 0, &m).unwrap(),
            AttributeReader::new(t.clone(), "to", 0, &m).unwrap(),
        ];
        let out = materialize_positions(&PositionBlock::single("edges", vec![0, 2]), &attrs, &[], &m).unwrap();
        assert_eq!(out.rows(), vec![vec![Value::Int(0), Value::Int(1)], vec![Value::Int(2), Value::Int(3)]]);
        assert_eq!(m.rows_materialized(), 2);

        let zeros = materialize_positions(
            &PositionBlock::single("edges", vec![1, 2, 0]),
            &[],
            &[Computed::new("depth", Expr::ConstInt(0))],
            &m,
        )
        .unwrap();
        assert_eq!(zeros.column(0), &ColumnData::Int32(vec![0, 0, 0]));

        let empty = materialize_positions(&PositionBlock::single("edges", vec![]), &attrs, &[], &m).unwrap();
        assert_eq!(empty.len(), 0);
        assert_eq!(empty.schema().len(), 2);
    }
}
