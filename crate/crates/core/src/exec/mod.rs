//! Pull-based operators.
//!
//! Every operator implements [`Operator`]: `open`, then `next` until it
//! returns `Ok(None)` (end of stream), then `close`. `reset` rewinds an
//! operator and its children to the freshly opened state; recursion uses it
//! to re-run the recursive branch once per level.

mod join;
mod scan;

use alloc::boxed::Box;
use alloc::string::String;
use alloc::sync::Arc;
use core::fmt;

pub use join::{BuildInput, JoinOutput, JoinSide, PHashJoin, THashJoin};
pub use scan::{DataSource, Materialize, PosFilter, Project, TupleFilter};

use crate::blocks::{PositionBlock, TupleBlock};
use crate::error::{Error, Result};
use crate::types::Field;

/// Data exchanged between operators.
pub trait Block: Clone + fmt::Debug {
    /// What a consumer can rely on for every block of a stream: the output
    /// schema for tuples, the covered tables for positions.
    type Shape: Clone + PartialEq + fmt::Debug;

    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl Block for TupleBlock {
    type Shape = Arc<[Field]>;

    fn len(&self) -> usize {
        TupleBlock::len(self)
    }
}

impl Block for PositionBlock {
    type Shape = Arc<[String]>;

    fn len(&self) -> usize {
        PositionBlock::len(self)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OperatorStats {
    pub blocks_out: u64,
    pub rows_out: u64,
}

pub trait Operator {
    type Block: Block;

    fn open(&mut self) -> Result<()>;

    /// The next block, or `None` once the stream is exhausted. Never returns
    /// an empty block.
    fn next(&mut self) -> Result<Option<Self::Block>>;

    fn close(&mut self);

    fn reset(&mut self) -> Result<()>;

    fn shape(&self) -> <Self::Block as Block>::Shape;

    /// Cumulative since construction; `reset` does not clear them.
    fn stats(&self) -> OperatorStats;
}

pub type BoxedOperator<B> = Box<dyn Operator<Block = B>>;
pub type PositionOp = BoxedOperator<PositionBlock>;
pub type TupleOp = BoxedOperator<TupleBlock>;

/// Lifecycle and output accounting shared by all operators.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Lifecycle {
    stats: OperatorStats,
    opened: bool,
    done: bool,
}

impl Lifecycle {
    pub(crate) fn open(&mut self) {
        self.opened = true;
        self.done = false;
    }

    /// `Ok(true)` when the stream is already exhausted.
    pub(crate) fn finished(&self) -> Result<bool> {
        if !self.opened {
            return Err(Error::ProtocolViolation("next() called before open()"));
        }
        Ok(self.done)
    }

    pub(crate) fn emit<B: Block>(&mut self, block: Option<B>) -> Result<Option<B>> {
        match &block {
            Some(b) => {
                self.stats.blocks_out += 1;
                self.stats.rows_out += b.len() as u64;
            }
            None => self.done = true,
        }
        Ok(block)
    }

    pub(crate) fn reset(&mut self) {
        self.done = false;
    }

    pub(crate) fn close(&mut self) {
        self.opened = false;
    }

    pub(crate) fn stats(&self) -> OperatorStats {
        self.stats
    }
}

/// Drains an opened operator into a vector of blocks.
pub fn drain<B: Block>(op: &mut dyn Operator<Block = B>) -> Result<alloc::vec::Vec<B>> {
    let mut out = alloc::vec::Vec::new();
    while let Some(b) = op.next()? {
        out.push(b);
    }
    Ok(out)
}
