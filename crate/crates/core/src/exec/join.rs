//! Hash equi-joins on int32 keys. Both drain their build child into a hash
//! table on the first `next()` and then stream the probe child.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::rc::Rc;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;

use hashbrown::HashMap;
use serde::{Deserialize, Serialize};

use super::{Lifecycle, Operator, OperatorStats, PositionOp, TupleOp};
use crate::blocks::{AttributeReader, PositionBlock, TupleBlock};
use crate::error::{Error, Result};
use crate::metrics::QueryMetrics;
use crate::types::{ColumnData, Field};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JoinSide {
    Build,
    Probe,
}

/// One output column of a tuple join: a column of either input, optionally
/// renamed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JoinOutput {
    pub side: JoinSide,
    pub column: String,
    #[serde(rename = "as", default, skip_serializing_if = "Option::is_none")]
    pub alias: Option<String>,
}

impl JoinOutput {
    pub fn new(side: JoinSide, column: impl Into<String>) -> Self {
        JoinOutput { side, column: column.into(), alias: None }
    }

    pub fn output_name(&self) -> &str {
        self.alias.as_deref().unwrap_or(&self.column)
    }
}

fn int_key(schema: &[Field], name: &str) -> Result<usize> {
    let i = schema
        .iter()
        .position(|f| f.name == name)
        .ok_or_else(|| Error::UnknownColumn(name.to_string()))?;
    if !schema[i].ty.is_int() {
        return Err(Error::KeyTypeError(name.to_string()));
    }
    Ok(i)
}

struct BuildTable {
    blocks: Vec<TupleBlock>,
    /// Key to `(block, row)` references in insertion order.
    buckets: HashMap<i32, Vec<(u32, u32)>>,
    rows: usize,
}

/// Tuple hash join. Output rows come out probe-major, and for one probe row
/// in build insertion order.
pub struct THashJoin {
    build: TupleOp,
    probe: TupleOp,
    build_key: usize,
    probe_key: usize,
    output: Vec<(JoinSide, usize)>,
    out_schema: Arc<[Field]>,
    capacity: usize,
    metrics: Rc<QueryMetrics>,
    table: Option<BuildTable>,
    pending: VecDeque<TupleBlock>,
    life: Lifecycle,
}

impl THashJoin {
    pub fn new(
        build: TupleOp,
        probe: TupleOp,
        build_key: &str,
        probe_key: &str,
        output: &[JoinOutput],
        capacity: usize,
        metrics: Rc<QueryMetrics>,
    ) -> Result<Self> {
        let build_schema = build.shape();
        let probe_schema = probe.shape();
        let build_key = int_key(&build_schema, build_key)?;
        let probe_key = int_key(&probe_schema, probe_key)?;
        let mut resolved = Vec::with_capacity(output.len());
        let mut fields: Vec<Field> = Vec::with_capacity(output.len());
        for o in output {
            let schema = match o.side {
                JoinSide::Build => &build_schema,
                JoinSide::Probe => &probe_schema,
            };
            let i = schema
                .iter()
                .position(|f| f.name == o.column)
                .ok_or_else(|| Error::UnknownColumn(o.column.clone()))?;
            if fields.iter().any(|f| f.name == o.output_name()) {
                return Err(Error::SchemaMismatch(format!(
                    "duplicate join output column `{}`",
                    o.output_name()
                )));
            }
            fields.push(Field::new(o.output_name(), schema[i].ty));
            resolved.push((o.side, i));
        }
        Ok(THashJoin {
            build,
            probe,
            build_key,
            probe_key,
            output: resolved,
            out_schema: fields.into(),
            capacity: capacity.max(1),
            metrics,
            table: None,
            pending: VecDeque::new(),
            life: Lifecycle::default(),
        })
    }

    fn build_table(&mut self) -> Result<()> {
        let mut table = BuildTable { blocks: Vec::new(), buckets: HashMap::new(), rows: 0 };
        while let Some(block) = self.build.next()? {
            let b = table.blocks.len() as u32;
            let keys = block.column(self.build_key).ints().ok_or_else(|| {
                Error::KeyTypeError(block.schema()[self.build_key].name.clone())
            })?;
            for (r, &k) in keys.iter().enumerate() {
                table.buckets.entry(k).or_default().push((b, r as u32));
            }
            table.rows += block.len();
            table.blocks.push(block);
        }
        self.metrics.add_hash_build_rows(table.rows as u64);
        self.table = Some(table);
        Ok(())
    }

    fn join_block(&mut self, probe: &TupleBlock) -> Result<()> {
        let table = self.table.as_ref().expect("build side drained");
        let keys = probe
            .column(self.probe_key)
            .ints()
            .ok_or_else(|| Error::KeyTypeError(probe.schema()[self.probe_key].name.clone()))?;
        let mut probe_rows: Vec<u32> = Vec::new();
        let mut build_refs: Vec<(u32, u32)> = Vec::new();
        for (r, k) in keys.iter().enumerate() {
            if let Some(refs) = table.buckets.get(k) {
                for &br in refs {
                    probe_rows.push(r as u32);
                    build_refs.push(br);
                }
            }
        }
        let mut start = 0;
        while start < probe_rows.len() {
            let end = (start + self.capacity).min(probe_rows.len());
            let mut columns = Vec::with_capacity(self.output.len());
            for &(side, i) in &self.output {
                let col = match side {
                    JoinSide::Probe => probe.column(i).gather(&probe_rows[start..end]),
                    JoinSide::Build => {
                        let mut col = ColumnData::with_capacity(self.out_schema[columns.len()].ty, end - start);
                        for &(b, r) in &build_refs[start..end] {
                            let (b, r) = (b as usize, r as usize);
                            col.extend_from(table.blocks[b].column(i), r, r + 1);
                        }
                        col
                    }
                };
                columns.push(col);
            }
            self.pending.push_back(TupleBlock::new(self.out_schema.clone(), columns)?);
            start = end;
        }
        Ok(())
    }
}

impl Operator for THashJoin {
    type Block = TupleBlock;

    fn open(&mut self) -> Result<()> {
        self.build.open()?;
        self.probe.open()?;
        self.life.open();
        Ok(())
    }

    fn next(&mut self) -> Result<Option<TupleBlock>> {
        if self.life.finished()? {
            return Ok(None);
        }
        if self.table.is_none() {
            self.build_table()?;
        }
        loop {
            if let Some(b) = self.pending.pop_front() {
                return self.life.emit(Some(b));
            }
            if self.table.as_ref().is_some_and(|t| t.rows == 0) {
                return self.life.emit(None);
            }
            match self.probe.next()? {
                Some(block) => self.join_block(&block)?,
                None => return self.life.emit(None),
            }
        }
    }

    fn close(&mut self) {
        self.table = None;
        self.pending.clear();
        self.build.close();
        self.probe.close();
        self.life.close();
    }

    fn reset(&mut self) -> Result<()> {
        self.table = None;
        self.pending.clear();
        self.build.reset()?;
        self.probe.reset()?;
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

/// Build input of a positional join: positions (keys fetched through a
/// reader) or tuples (keys taken from a column).
pub enum BuildInput {
    Positions { op: PositionOp, key: AttributeReader },
    Tuples { op: TupleOp, key: String },
}

enum BuildSide {
    Positions { op: PositionOp, key: AttributeReader },
    Tuples { op: TupleOp, key: usize },
}

/// Positional hash join: emits positions of the probe's table, once per
/// matching build occurrence. Build rows only contribute key multiplicities.
pub struct PHashJoin {
    build: BuildSide,
    probe: PositionOp,
    probe_key: AttributeReader,
    output_table: String,
    slot: usize,
    capacity: usize,
    metrics: Rc<QueryMetrics>,
    counts: Option<HashMap<i32, u32>>,
    pending: VecDeque<PositionBlock>,
    life: Lifecycle,
}

impl PHashJoin {
    /// `probe_key` must read a table covered by the probe, and that table is
    /// the join's `output_table`.
    pub fn new(
        build: BuildInput,
        probe: PositionOp,
        probe_key: AttributeReader,
        output_table: &str,
        capacity: usize,
        metrics: Rc<QueryMetrics>,
    ) -> Result<Self> {
        let probe_tables = probe.shape();
        let slot = probe_tables
            .iter()
            .position(|t| t == output_table)
            .ok_or_else(|| Error::TableNotCovered(output_table.to_string()))?;
        if probe_key.table_name() != output_table {
            return Err(Error::TableMismatch(format!(
                "probe key reads `{}`, join outputs `{output_table}`",
                probe_key.table_name()
            )));
        }
        if !probe_key.field().ty.is_int() {
            return Err(Error::KeyTypeError(probe_key.field().name.clone()));
        }
        let build = match build {
            BuildInput::Positions { op, key } => {
                if !key.field().ty.is_int() {
                    return Err(Error::KeyTypeError(key.field().name.clone()));
                }
                if !op.shape().iter().any(|t| t == key.table_name()) {
                    return Err(Error::TableNotCovered(key.table_name().to_string()));
                }
                BuildSide::Positions { op, key }
            }
            BuildInput::Tuples { op, key } => {
                let key = int_key(&op.shape(), &key)?;
                BuildSide::Tuples { op, key }
            }
        };
        Ok(PHashJoin {
            build,
            probe,
            probe_key,
            output_table: output_table.to_string(),
            slot,
            capacity: capacity.max(1),
            metrics,
            counts: None,
            pending: VecDeque::new(),
            life: Lifecycle::default(),
        })
    }

    fn build_counts(&mut self) -> Result<()> {
        let mut counts: HashMap<i32, u32> = HashMap::new();
        let mut rows = 0u64;
        match &mut self.build {
            BuildSide::Positions { op, key } => {
                while let Some(block) = op.next()? {
                    let keys = key.fetch(&block)?;
                    for &k in keys.ints().expect("int key") {
                        *counts.entry(k).or_insert(0) += 1;
                    }
                    rows += block.len() as u64;
                }
            }
            BuildSide::Tuples { op, key } => {
                while let Some(block) = op.next()? {
                    let keys = block.column(*key).ints().expect("int key");
                    for &k in keys {
                        *counts.entry(k).or_insert(0) += 1;
                    }
                    rows += block.len() as u64;
                }
            }
        }
        self.metrics.add_hash_build_rows(rows);
        self.counts = Some(counts);
        Ok(())
    }

    fn join_block(&mut self, probe: &PositionBlock) -> Result<()> {
        let counts = self.counts.as_ref().expect("build side drained");
        let keys = self.probe_key.fetch(probe)?;
        let positions = probe.positions(self.slot);
        let mut out = Vec::new();
        for (&k, &p) in keys.ints().expect("int key").iter().zip(positions) {
            if let Some(&m) = counts.get(&k) {
                out.extend(core::iter::repeat_n(p, m as usize));
            }
        }
        for chunk in out.chunks(self.capacity) {
            self.pending.push_back(PositionBlock::single(self.output_table.clone(), chunk.to_vec()));
        }
        Ok(())
    }

    fn build_open(&mut self) -> Result<()> {
        match &mut self.build {
            BuildSide::Positions { op, .. } => op.open(),
            BuildSide::Tuples { op, .. } => op.open(),
        }
    }

    fn build_reset(&mut self) -> Result<()> {
        match &mut self.build {
            BuildSide::Positions { op, .. } => op.reset(),
            BuildSide::Tuples { op, .. } => op.reset(),
        }
    }

    fn build_close(&mut self) {
        match &mut self.build {
            BuildSide::Positions { op, .. } => op.close(),
            BuildSide::Tuples { op, .. } => op.close(),
        }
    }
}

impl Operator for PHashJoin {
    type Block = PositionBlock;

    fn open(&mut self) -> Result<()> {
        self.build_open()?;
        self.probe.open()?;
        self.life.open();
        Ok(())
    }

    fn next(&mut self) -> Result<Option<PositionBlock>> {
        if self.life.finished()? {
            return Ok(None);
        }
        if self.counts.is_none() {
            self.build_counts()?;
        }
        loop {
            if let Some(b) = self.pending.pop_front() {
                return self.life.emit(Some(b));
            }
            if self.counts.as_ref().is_some_and(|c| c.is_empty()) {
                return self.life.emit(None);
            }
            match self.probe.next()? {
                Some(block) => self.join_block(&block)?,
                None => return self.life.emit(None),
            }
        }
    }

    fn close(&mut self) {
        self.counts = None;
        self.pending.clear();
        self.build_close();
        self.probe.close();
        self.life.close();
    }

    fn reset(&mut self) -> Result<()> {
        self.counts = None;
        self.pending.clear();
        self.build_reset()?;
        self.probe.reset()?;
        self.life.reset();
        Ok(())
    }

    fn shape(&self) -> Arc<[String]> {
        alloc::vec![self.output_table.clone()].into()
    }

    fn stats(&self) -> OperatorStats {
        self.life.stats()
    }
}
