use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;

use super::{Lifecycle, Operator, OperatorStats, PositionOp, TupleOp};
use crate::blocks::{AttributeReader, Materializer, PositionBlock, TupleBlock};
use crate::error::{Error, Result};
use crate::expr::{Computed, Expr, Predicate};
use crate::source::TableRef;
use crate::types::Field;

/// Emits the positions `0..row_count` of one table in blocks.
pub struct DataSource {
    table: TableRef,
    capacity: usize,
    cursor: usize,
    life: Lifecycle,
}

impl DataSource {
    pub fn new(table: TableRef, capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidConfig("block capacity must be at least 1".to_string()));
        }
        Ok(DataSource { table, capacity, cursor: 0, life: Lifecycle::default() })
    }
}

impl Operator for DataSource {
    type Block = PositionBlock;

    fn open(&mut self) -> Result<()> {
        self.cursor = 0;
        self.life.open();
        Ok(())
    }

    fn next(&mut self) -> Result<Option<PositionBlock>> {
        if self.life.finished()? {
            return Ok(None);
        }
        let rows = self.table.row_count();
        if self.cursor >= rows {
            return self.life.emit(None);
        }
        let end = (self.cursor + self.capacity).min(rows);
        let block = PositionBlock::single(self.table.name(), (self.cursor as u32..end as u32).collect());
        self.cursor = end;
        self.life.emit(Some(block))
    }

    fn close(&mut self) {
        self.life.close();
    }

    fn reset(&mut self) -> Result<()> {
        self.cursor = 0;
        self.life.reset();
        Ok(())
    }

    fn shape(&self) -> Arc<[String]> {
        alloc::vec![self.table.name().to_string()].into()
    }

    fn stats(&self) -> OperatorStats {
        self.life.stats()
    }
}

/// Keeps the rows of positional blocks whose attribute satisfies a predicate.
pub struct PosFilter {
    child: PositionOp,
    reader: AttributeReader,
    predicate: Predicate,
    life: Lifecycle,
}

impl PosFilter {
    /// `reader` must read `predicate.col`.
    pub fn new(child: PositionOp, reader: AttributeReader, predicate: Predicate) -> Result<Self> {
        if reader.field().name != predicate.col {
            return Err(Error::UnknownColumn(predicate.col.clone()));
        }
        if !reader.field().ty.is_int() {
            return Err(Error::ExpressionTypeError(alloc::format!(
                "predicate `{predicate}` compares a varchar column"
            )));
        }
        Ok(PosFilter { child, reader, predicate, life: Lifecycle::default() })
    }
}

impl Operator for PosFilter {
    type Block = PositionBlock;

    fn open(&mut self) -> Result<()> {
        self.child.open()?;
        self.life.open();
        Ok(())
    }

    fn next(&mut self) -> Result<Option<PositionBlock>> {
        if self.life.finished()? {
            return Ok(None);
        }
        while let Some(block) = self.child.next()? {
            let values = self.reader.fetch(&block)?;
            let keep = self.predicate.select(&values)?;
            if keep.is_empty() {
                continue;
            }
            if keep.len() == block.len() {
                return self.life.emit(Some(block));
            }
            let positions: Vec<Vec<u32>> = (0..block.tables().len())
                .map(|slot| {
                    let src = block.positions(slot);
                    keep.iter().map(|&r| src[r as usize]).collect()
                })
                .collect();
            return self.life.emit(Some(PositionBlock::new(block.tables().to_vec(), positions)?));
        }
        self.life.emit(None)
    }

    fn close(&mut self) {
        self.child.close();
        self.life.close();
    }

    fn reset(&mut self) -> Result<()> {
        self.child.reset()?;
        self.life.reset();
        Ok(())
    }

    fn shape(&self) -> Arc<[String]> {
        self.child.shape()
    }

    fn stats(&self) -> OperatorStats {
        self.life.stats()
    }
}

/// Converts each positional child block into a tuple block.
pub struct Materialize {
    child: PositionOp,
    materializer: Materializer,
    life: Lifecycle,
}

impl Materialize {
    pub fn new(child: PositionOp, materializer: Materializer) -> Self {
        Materialize { child, materializer, life: Lifecycle::default() }
    }
}

impl Operator for Materialize {
    type Block = TupleBlock;

    fn open(&mut self) -> Result<()> {
        self.child.open()?;
        self.life.open();
        Ok(())
    }

    fn next(&mut self) -> Result<Option<TupleBlock>> {
        if self.life.finished()? {
            return Ok(None);
        }
        match self.child.next()? {
            Some(block) => {
                let out = self.materializer.materialize(&block)?;
                self.life.emit(Some(out))
            }
            None => self.life.emit(None),
        }
    }

    fn close(&mut self) {
        self.child.close();
        self.life.close();
    }

    fn reset(&mut self) -> Result<()> {
        self.child.reset()?;
        self.life.reset();
        Ok(())
    }

    fn shape(&self) -> Arc<[Field]> {
        self.materializer.out_schema().clone()
    }

    fn stats(&self) -> OperatorStats {
        self.life.stats()
    }
}

/// Row filter over tuple blocks.
pub struct TupleFilter {
    child: TupleOp,
    predicate: Predicate,
    column: usize,
    life: Lifecycle,
}

impl TupleFilter {
    pub fn new(child: TupleOp, predicate: Predicate) -> Result<Self> {
        let schema = child.shape();
        let column = schema
            .iter()
            .position(|f| f.name == predicate.col)
            .ok_or_else(|| Error::UnknownColumn(predicate.col.clone()))?;
        if !schema[column].ty.is_int() {
            return Err(Error::ExpressionTypeError(alloc::format!(
                "predicate `{predicate}` compares a varchar column"
            )));
        }
        Ok(TupleFilter { child, predicate, column, life: Lifecycle::default() })
    }
}

impl Operator for TupleFilter {
    type Block = TupleBlock;

    fn open(&mut self) -> Result<()> {
        self.child.open()?;
        self.life.open();
        Ok(())
    }

    fn next(&mut self) -> Result<Option<TupleBlock>> {
        if self.life.finished()? {
            return Ok(None);
        }
        while let Some(block) = self.child.next()? {
            let keep = self.predicate.select(block.column(self.column))?;
            if keep.is_empty() {
                continue;
            }
            if keep.len() == block.len() {
                return self.life.emit(Some(block));
            }
            return self.life.emit(Some(block.select(&keep)));
        }
        self.life.emit(None)
    }

    fn close(&mut self) {
        self.child.close();
        self.life.close();
    }

    fn reset(&mut self) -> Result<()> {
        self.child.reset()?;
        self.life.reset();
        Ok(())
    }

    fn shape(&self) -> Arc<[Field]> {
        self.child.shape()
    }

    fn stats(&self) -> OperatorStats {
        self.life.stats()
    }
}

/// Evaluates one expression per output column over each tuple block.
pub struct Project {
    child: TupleOp,
    columns: Vec<Computed>,
    in_schema: Arc<[Field]>,
    out_schema: Arc<[Field]>,
    life: Lifecycle,
}

impl Project {
    pub fn new(child: TupleOp, columns: Vec<Computed>) -> Result<Self> {
        let in_schema = child.shape();
        let mut out: Vec<Field> = Vec::with_capacity(columns.len());
        for c in &columns {
            if out.iter().any(|f| f.name == c.name) {
                return Err(Error::SchemaMismatch(alloc::format!("duplicate output column `{}`", c.name)));
            }
            out.push(Field::new(c.name.clone(), c.expr.result_type(&in_schema)?));
        }
        Ok(Project { child, columns, in_schema, out_schema: out.into(), life: Lifecycle::default() })
    }
}

impl Operator for Project {
    type Block = TupleBlock;

    fn open(&mut self) -> Result<()> {
        self.child.open()?;
        self.life.open();
        Ok(())
    }

    fn next(&mut self) -> Result<Option<TupleBlock>> {
        if self.life.finished()? {
            return Ok(None);
        }
        let Some(block) = self.child.next()? else {
            return self.life.emit(None);
        };
        let mut out = Vec::with_capacity(self.columns.len());
        for c in &self.columns {
            let col = match &c.expr {
                Expr::Col(name) => {
                    let i = block.column_index(name)?;
                    block.columns()[i].clone()
                }
                expr => Arc::new(expr.eval(&self.in_schema, block.columns(), block.len())?),
            };
            out.push(col);
        }
        self.life.emit(Some(TupleBlock::from_shared(self.out_schema.clone(), out)?))
    }

    fn close(&mut self) {
        self.child.close();
        self.life.close();
    }

    fn reset(&mut self) -> Result<()> {
        self.child.reset()?;
        self.life.reset();
        Ok(())
    }

    fn shape(&self) -> Arc<[Field]> {
        self.out_schema.clone()
    }

    fn stats(&self) -> OperatorStats {
        self.life.stats()
    }
}
