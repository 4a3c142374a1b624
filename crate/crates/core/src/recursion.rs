//! Level-by-level recursive evaluation.
//!
//! A [`Recursive`] operator owns a [`LevelStore`] shared with one
//! [`RecursiveCte`] leaf placed somewhere inside its recursive branch. The
//! operator
//!
//! 1. drains its seed child into `cur_level` (level 0),
//! 2. passes the `cur_level` blocks upward,
//! 3. resets and drains the recursive branch, whose CTE leaf replays
//!    `cur_level` block by block, collecting the output into `next_level`,
//! 4. swaps the levels and continues with step 2,
//!
//! until a level comes back empty or `max_depth` levels have been produced.
//! Output is therefore grouped by level, in BFS order. The same code serves
//! both representations: [`TRecursive`] over tuple blocks and
//! [`PRecursive`] over position blocks of a single table.

use alloc::format;
use alloc::rc::Rc;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::cell::RefCell;
use core::mem;

use serde::{Deserialize, Serialize};

use crate::blocks::{PositionBlock, TupleBlock};
use crate::error::{Error, Result};
use crate::exec::{Block, BoxedOperator, Lifecycle, Operator, OperatorStats};
use crate::metrics::QueryMetrics;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    Tuple,
    Positional,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecursiveConfig {
    /// Highest level produced; the seed is level 0.
    pub max_depth: u32,
    pub representation: Representation,
    /// The only table positional recursion may cover.
    pub output_table: Option<String>,
}

impl RecursiveConfig {
    pub fn tuple(max_depth: u32) -> Self {
        RecursiveConfig { max_depth, representation: Representation::Tuple, output_table: None }
    }

    pub fn positional(max_depth: u32, output_table: impl Into<String>) -> Self {
        RecursiveConfig {
            max_depth,
            representation: Representation::Positional,
            output_table: Some(output_table.into()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    /// Seed not yet drained.
    Fresh,
    /// Passing `cur_level` upward.
    Emitting,
    /// Draining the recursive branch; the CTE may pull.
    Recursing,
    Done,
}

/// Working state shared by a recursive operator and its CTE leaf.
#[derive(Debug)]
pub struct LevelStore<B> {
    cur_level: Vec<B>,
    next_level: Vec<B>,
    up_cursor: usize,
    cte_cursor: usize,
    depth: u32,
    phase: Phase,
}

impl<B: Block> LevelStore<B> {
    fn new() -> Self {
        LevelStore {
            cur_level: Vec::new(),
            next_level: Vec::new(),
            up_cursor: 0,
            cte_cursor: 0,
            depth: 0,
            phase: Phase::Fresh,
        }
    }

    fn clear(&mut self) {
        *self = Self::new();
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn cur_level(&self) -> &[B] {
        &self.cur_level
    }

    pub fn next_level(&self) -> &[B] {
        &self.next_level
    }

    pub fn up_cursor(&self) -> usize {
        self.up_cursor
    }

    pub fn cte_cursor(&self) -> usize {
        self.cte_cursor
    }

    /// Replaces `cur_level` with `next_level` and moves one level deeper.
    fn swap_levels(&mut self) {
        self.cur_level = mem::take(&mut self.next_level);
        self.depth += 1;
        self.up_cursor = 0;
        self.cte_cursor = 0;
    }

    fn resident_blocks(&self) -> usize {
        self.cur_level.len() + self.next_level.len()
    }
}

/// Handle tying a recursive operator to the CTE leaves of its branch.
/// Create it first, build the recursive branch with [`CteBinding::cte`],
/// then hand both to [`Recursive::new`].
pub struct CteBinding<B: Block> {
    store: Rc<RefCell<LevelStore<B>>>,
    shape: B::Shape,
}

impl<B: Block> CteBinding<B> {
    /// `shape` is what the seed (and therefore every level) produces.
    pub fn new(shape: B::Shape) -> Self {
        CteBinding { store: Rc::new(RefCell::new(LevelStore::new())), shape }
    }

    pub fn cte(&self) -> RecursiveCte<B> {
        RecursiveCte { store: self.store.clone(), shape: self.shape.clone(), life: Lifecycle::default() }
    }

    fn is_bound(&self) -> bool {
        Rc::strong_count(&self.store) > 1
    }
}

pub struct Recursive<B: Block> {
    seed: BoxedOperator<B>,
    recursive: BoxedOperator<B>,
    store: Rc<RefCell<LevelStore<B>>>,
    max_depth: u32,
    shape: B::Shape,
    metrics: Rc<QueryMetrics>,
    life: Lifecycle,
}

pub type TRecursive = Recursive<TupleBlock>;
pub type PRecursive = Recursive<PositionBlock>;
pub type TRecursiveCte = RecursiveCte<TupleBlock>;
pub type PRecursiveCte = RecursiveCte<PositionBlock>;

impl<B: Block> Recursive<B> {
    fn assemble(
        seed: BoxedOperator<B>,
        recursive: BoxedOperator<B>,
        binding: CteBinding<B>,
        max_depth: u32,
        metrics: Rc<QueryMetrics>,
    ) -> Result<Self> {
        if !binding.is_bound() {
            return Err(Error::CteUnbound);
        }
        Ok(Recursive {
            seed,
            recursive,
            store: binding.store,
            max_depth,
            shape: binding.shape,
            metrics,
            life: Lifecycle::default(),
        })
    }

    pub fn depth(&self) -> u32 {
        self.store.borrow().depth
    }

    /// Runs the recursive branch once over `cur_level` and swaps levels.
    fn advance_level(&mut self) -> Result<()> {
        {
            let mut store = self.store.borrow_mut();
            store.phase = Phase::Recursing;
            store.cte_cursor = 0;
            store.next_level.clear();
        }
        self.recursive.reset()?;
        // The CTE leaf borrows the store from inside `next()`.
        while let Some(block) = self.recursive.next()? {
            if block.is_empty() {
                continue;
            }
            let mut store = self.store.borrow_mut();
            store.next_level.push(block);
            self.metrics.observe_resident_blocks(store.resident_blocks());
        }
        let mut store = self.store.borrow_mut();
        store.swap_levels();
        store.phase = if store.cur_level.is_empty() { Phase::Done } else { Phase::Emitting };
        Ok(())
    }
}

impl TRecursive {
    pub fn new(
        seed: BoxedOperator<TupleBlock>,
        recursive: BoxedOperator<TupleBlock>,
        binding: CteBinding<TupleBlock>,
        cfg: &RecursiveConfig,
        metrics: Rc<QueryMetrics>,
    ) -> Result<Self> {
        if cfg.representation != Representation::Tuple {
            return Err(Error::InvalidConfig("TRecursive needs a tuple config".into()));
        }
        let (s, r) = (seed.shape(), recursive.shape());
        if s != r || binding.shape != s {
            return Err(Error::SchemaMismatch(format!(
                "seed {:?} vs recursive {:?}",
                names(&s),
                names(&r)
            )));
        }
        Self::assemble(seed, recursive, binding, cfg.max_depth, metrics)
    }
}

fn names(schema: &[crate::types::Field]) -> Vec<&str> {
    schema.iter().map(|f| f.name.as_str()).collect()
}

impl PRecursive {
    pub fn new(
        seed: BoxedOperator<PositionBlock>,
        recursive: BoxedOperator<PositionBlock>,
        binding: CteBinding<PositionBlock>,
        cfg: &RecursiveConfig,
        metrics: Rc<QueryMetrics>,
    ) -> Result<Self> {
        let table = match (&cfg.representation, &cfg.output_table) {
            (Representation::Positional, Some(t)) => t.as_str(),
            _ => return Err(Error::InvalidConfig("PRecursive needs an output table".into())),
        };
        for (role, shape) in [("seed", seed.shape()), ("recursive", recursive.shape()), ("cte", binding.shape.clone())] {
            if shape.len() != 1 || shape[0] != table {
                return Err(Error::TableMismatch(format!(
                    "{role} covers {:?}, expected only `{table}`",
                    &shape[..]
                )));
            }
        }
        Self::assemble(seed, recursive, binding, cfg.max_depth, metrics)
    }
}

impl<B: Block> Operator for Recursive<B> {
    type Block = B;

    fn open(&mut self) -> Result<()> {
        self.seed.open()?;
        self.recursive.open()?;
        self.store.borrow_mut().clear();
        self.life.open();
        Ok(())
    }

    fn next(&mut self) -> Result<Option<B>> {
        if self.life.finished()? {
            return Ok(None);
        }
        loop {
            let phase = self.store.borrow().phase;
            match phase {
                Phase::Fresh => {
                    let mut level = Vec::new();
                    while let Some(block) = self.seed.next()? {
                        if !block.is_empty() {
                            level.push(block);
                        }
                    }
                    let mut store = self.store.borrow_mut();
                    store.cur_level = level;
                    store.depth = 0;
                    store.phase = if store.cur_level.is_empty() { Phase::Done } else { Phase::Emitting };
                    self.metrics.observe_resident_blocks(store.resident_blocks());
                }
                Phase::Emitting => {
                    let mut store = self.store.borrow_mut();
                    if store.up_cursor < store.cur_level.len() {
                        let block = store.cur_level[store.up_cursor].clone();
                        store.up_cursor += 1;
                        self.metrics.record_level(store.depth, block.len());
                        drop(store);
                        return self.life.emit(Some(block));
                    }
                    if store.depth >= self.max_depth {
                        store.phase = Phase::Done;
                        continue;
                    }
                    drop(store);
                    self.advance_level()?;
                }
                Phase::Recursing => {
                    return Err(Error::ProtocolViolation("recursive operator re-entered while recursing"))
                }
                Phase::Done => return self.life.emit(None),
            }
        }
    }

    fn close(&mut self) {
        self.seed.close();
        self.recursive.close();
        self.store.borrow_mut().clear();
        self.life.close();
    }

    fn reset(&mut self) -> Result<()> {
        self.seed.reset()?;
        self.recursive.reset()?;
        self.store.borrow_mut().clear();
        self.life.reset();
        Ok(())
    }

    fn shape(&self) -> B::Shape {
        self.shape.clone()
    }

    fn stats(&self) -> OperatorStats {
        self.life.stats()
    }
}

/// Leaf of the recursive branch replaying the owner's current level.
pub struct RecursiveCte<B: Block> {
    store: Rc<RefCell<LevelStore<B>>>,
    shape: B::Shape,
    life: Lifecycle,
}

impl<B: Block> Operator for RecursiveCte<B> {
    type Block = B;

    fn open(&mut self) -> Result<()> {
        self.life.open();
        Ok(())
    }

    fn next(&mut self) -> Result<Option<B>> {
        if self.life.finished()? {
            return Ok(None);
        }
        let mut store = self.store.borrow_mut();
        if store.phase != Phase::Recursing {
            return Err(Error::ProtocolViolation("CTE pulled while its owner is not recursing"));
        }
        let block = store.cur_level.get(store.cte_cursor).cloned();
        if block.is_some() {
            store.cte_cursor += 1;
        }
        drop(store);
        self.life.emit(block)
    }

    fn close(&mut self) {
        self.life.close();
    }

    fn reset(&mut self) -> Result<()> {
        self.life.reset();
        Ok(())
    }

    fn shape(&self) -> B::Shape {
        self.shape.clone()
    }

    fn stats(&self) -> OperatorStats {
        self.life.stats()
    }
}

/// Shape of a tuple CTE: its owner's schema.
pub type TupleShape = Arc<[crate::types::Field]>;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{ColumnData, ColumnType, Field};
    use alloc::boxed::Box;
    use alloc::vec;

    /// Replays fixed blocks; stands in for seed or branch children.
    struct Fixed {
        blocks: Vec<PositionBlock>,
        at: usize,
        life: Lifecycle,
    }

    impl Fixed {
        fn boxed(blocks: Vec<Vec<u32>>) -> BoxedOperator<PositionBlock> {
            Box::new(Fixed {
                blocks: blocks.into_iter().map(|p| PositionBlock::single("t", p)).collect(),
                at: 0,
                life: Lifecycle::default(),
            })
        }
    }

    impl Operator for Fixed {
        type Block = PositionBlock;
        fn open(&mut self) -> Result<()> {
            self.life.open();
            self.at = 0;
            Ok(())
        }
        fn next(&mut self) -> Result<Option<PositionBlock>> {
            if self.life.finished()? {
                return Ok(None);
            }
            let b = self.blocks.get(self.at).cloned();
            self.at += 1;
            self.life.emit(b)
        }
        fn close(&mut self) {}
        fn reset(&mut self) -> Result<()> {
            self.at = 0;
            self.life.reset();
            Ok(())
        }
        fn shape(&self) -> Arc<[String]> {
            vec![String::from("t")].into()
        }
        fn stats(&self) -> OperatorStats {
            self.life.stats()
        }
    }

    fn shape_t() -> Arc<[String]> {
        vec![String::from("t")].into()
    }

    #[test]
    fn cte_walks_level_and_resets() {
        let binding = CteBinding::<PositionBlock>::new(shape_t());
        let mut cte = binding.cte();
        cte.open().unwrap();
        {
            let mut s = binding.store.borrow_mut();
            s.cur_level = vec![PositionBlock::single("t", vec![0]), PositionBlock::single("t", vec![1])];
            s.phase = Phase::Recursing;
        }
        assert_eq!(cte.next().unwrap().unwrap().positions(0), &[0]);
        assert_eq!(cte.next().unwrap().unwrap().positions(0), &[1]);
        assert!(cte.next().unwrap().is_none());
        assert!(cte.next().unwrap().is_none());

        // Level swap: the new level is served from index 0.
        {
            let mut s = binding.store.borrow_mut();
            s.next_level = vec![PositionBlock::single("t", vec![7])];
            s.swap_levels();
            s.phase = Phase::Recursing;
        }
        cte.reset().unwrap();
        assert_eq!(cte.next().unwrap().unwrap().positions(0), &[7]);
        assert!(cte.next().unwrap().is_none());

        // Empty level.
        {
            let mut s = binding.store.borrow_mut();
            s.swap_levels();
            s.phase = Phase::Recursing;
        }
        cte.reset().unwrap();
        assert!(cte.next().unwrap().is_none());
    }

    #[test]
    fn cte_outside_recursion_is_protocol_violation() {
        let binding = CteBinding::<PositionBlock>::new(shape_t());
        let mut cte = binding.cte();
        cte.open().unwrap();
        assert!(matches!(cte.next(), Err(Error::ProtocolViolation(_))));
    }

    #[test]
    fn unbound_cte_is_rejected() {
        let binding = CteBinding::<PositionBlock>::new(shape_t());
        let r = PRecursive::new(
            Fixed::boxed(vec![vec![0]]),
            Fixed::boxed(vec![]),
            binding,
            &RecursiveConfig::positional(3, "t"),
            QueryMetrics::new(),
        );
        assert!(matches!(r, Err(Error::CteUnbound)));
    }

    #[test]
    fn levels_swap_until_empty_or_depth() {
        // Branch = the CTE itself, re-emitting each level unchanged: output
        // repeats the seed once per level up to max_depth.
        for max_depth in 0..4u32 {
            let binding = CteBinding::<PositionBlock>::new(shape_t());
            let cte = Box::new(binding.cte());
            let metrics = QueryMetrics::with_level_trace();
            let mut r = PRecursive::new(
                Fixed::boxed(vec![vec![0, 1], vec![2]]),
                cte,
                binding,
                &RecursiveConfig::positional(max_depth, "t"),
                metrics.clone(),
            )
            .unwrap();
            r.open().unwrap();
            let out = crate::exec::drain(&mut r).unwrap();
            assert_eq!(out.len(), 2 * (max_depth as usize + 1));
            let levels: Vec<u32> = metrics.level_trace().unwrap().iter().map(|e| e.level).collect();
            assert!(levels.windows(2).all(|w| w[0] <= w[1]));
            assert_eq!(*levels.last().unwrap(), max_depth);
            assert!(r.next().unwrap().is_none());
        }
    }

    #[test]
    fn empty_seed_never_runs_branch() {
        struct Exploding;
        impl Operator for Exploding {
            type Block = TupleBlock;
            fn open(&mut self) -> Result<()> {
                Ok(())
            }
            fn next(&mut self) -> Result<Option<TupleBlock>> {
                panic!("recursive branch drained")
            }
            fn close(&mut self) {}
            fn reset(&mut self) -> Result<()> {
                Ok(())
            }
            fn shape(&self) -> TupleShape {
                vec![Field::new("a", ColumnType::Int32)].into()
            }
            fn stats(&self) -> OperatorStats {
                OperatorStats::default()
            }
        }
        struct Empty;
        impl Operator for Empty {
            type Block = TupleBlock;
            fn open(&mut self) -> Result<()> {
                Ok(())
            }
            fn next(&mut self) -> Result<Option<TupleBlock>> {
                Ok(None)
            }
            fn close(&mut self) {}
            fn reset(&mut self) -> Result<()> {
                Ok(())
            }
            fn shape(&self) -> TupleShape {
                vec![Field::new("a", ColumnType::Int32)].into()
            }
            fn stats(&self) -> OperatorStats {
                OperatorStats::default()
            }
        }
        let schema: TupleShape = vec![Field::new("a", ColumnType::Int32)].into();
        let binding = CteBinding::<TupleBlock>::new(schema.clone());
        let _cte = binding.cte();
        let mut r = TRecursive::new(
            Box::new(Empty),
            Box::new(Exploding),
            binding,
            &RecursiveConfig::tuple(5),
            QueryMetrics::new(),
        )
        .unwrap();
        r.open().unwrap();
        assert!(r.next().unwrap().is_none());
        let _ = TupleBlock::new(schema, vec![ColumnData::Int32(vec![])]).unwrap();
    }
}
