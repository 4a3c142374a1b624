//! Per-query counters shared by the operators of one plan instance.

use alloc::collections::BTreeMap;
use alloc::rc::Rc;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cell::{Cell, RefCell};

/// `(table, column)`.
type ColumnKey = (String, String);

/// One block passed upward by a recursive operator, tagged with its level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LevelEvent {
    pub level: u32,
    pub rows: usize,
}

/// Counters for one query execution. Not thread-safe: a plan instance runs
/// on a single thread.
#[derive(Debug, Default)]
pub struct QueryMetrics {
    rows_materialized: Cell<u64>,
    hash_build_rows: Cell<u64>,
    peak_resident_blocks: Cell<u64>,
    values_read: RefCell<BTreeMap<ColumnKey, Rc<Cell<u64>>>>,
    level_trace: RefCell<Option<Vec<LevelEvent>>>,
}

impl QueryMetrics {
    pub fn new() -> Rc<Self> {
        Rc::new(Self::default())
    }

    /// Metrics that also record a [`LevelEvent`] per emitted recursive block.
    pub fn with_level_trace() -> Rc<Self> {
        let m = Self::default();
        *m.level_trace.borrow_mut() = Some(Vec::new());
        Rc::new(m)
    }

    /// Shared counter of values read from `table.column`.
    pub fn values_read_counter(&self, table: &str, column: &str) -> Rc<Cell<u64>> {
        self.values_read
            .borrow_mut()
            .entry((table.to_string(), column.to_string()))
            .or_default()
            .clone()
    }

    pub fn values_read(&self, table: &str, column: &str) -> u64 {
        self.values_read
            .borrow()
            .get(&(table.to_string(), column.to_string()))
            .map_or(0, |c| c.get())
    }

    /// All `(table, column, count)` triples, sorted.
    pub fn values_read_all(&self) -> Vec<(String, String, u64)> {
        self.values_read
            .borrow()
            .iter()
            .map(|((t, c), n)| (t.clone(), c.clone(), n.get()))
            .collect()
    }

    pub fn values_read_total(&self) -> u64 {
        self.values_read.borrow().values().map(|c| c.get()).sum()
    }

    /// Sum of values read from columns matching `pred`.
    pub fn values_read_where(&self, mut pred: impl FnMut(&str, &str) -> bool) -> u64 {
        self.values_read
            .borrow()
            .iter()
            .filter(|((t, c), _)| pred(t, c))
            .map(|(_, n)| n.get())
            .sum()
    }

    pub fn add_rows_materialized(&self, n: u64) {
        self.rows_materialized.set(self.rows_materialized.get() + n);
    }

    pub fn rows_materialized(&self) -> u64 {
        self.rows_materialized.get()
    }

    pub fn add_hash_build_rows(&self, n: u64) {
        self.hash_build_rows.set(self.hash_build_rows.get() + n);
    }

    /// Build-side rows summed over every hash table built during the query.
    pub fn hash_build_rows(&self) -> u64 {
        self.hash_build_rows.get()
    }

    pub fn observe_resident_blocks(&self, blocks: usize) {
        let blocks = blocks as u64;
        if blocks > self.peak_resident_blocks.get() {
            self.peak_resident_blocks.set(blocks);
        }
    }

    pub fn peak_resident_blocks(&self) -> u64 {
        self.peak_resident_blocks.get()
    }

    pub fn record_level(&self, level: u32, rows: usize) {
        if let Some(trace) = self.level_trace.borrow_mut().as_mut() {
            trace.push(LevelEvent { level, rows });
        }
    }

    /// Recorded level events, or `None` when tracing is off.
    pub fn level_trace(&self) -> Option<Vec<LevelEvent>> {
        self.level_trace.borrow().clone()
    }
}
