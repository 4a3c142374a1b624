//! Execution core for recursive queries over a position-enabled column store.
//!
//! Operators follow the pull-based Volcano contract and exchange either
//! [`PositionBlock`]s (join-index rows of table positions) or
//! [`TupleBlock`]s (materialized values). Recursion comes in two flavours
//! sharing one control loop: tuple-based ([`TRecursive`]) and
//! position-based ([`PRecursive`]), the latter deferring attribute reads
//! until after the traversal finishes.
//!
//! The crate is `no_std` and only needs `alloc`. Table storage is abstracted
//! by [`ColumnSource`]; the `posrec` crate provides the on-disk implementation.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(any(feature = "std", test))]
extern crate std;

pub mod blocks;
pub mod datagen;
pub mod error;
pub mod exec;
pub mod expr;
pub mod metrics;
pub mod oracle;
pub mod plan;
pub mod recursion;
pub mod source;
pub mod types;

pub use blocks::{AttributeReader, PositionBlock, TupleBlock};
pub use error::{Error, Result};
pub use exec::{BoxedOperator, Operator, OperatorStats};
pub use expr::{CmpOp, Computed, Expr, Predicate};
pub use metrics::QueryMetrics;
pub use recursion::{CteBinding, LevelStore, PRecursive, RecursiveConfig, Representation, TRecursive};
pub use source::{check_positions, ColumnSource, MemTable, TableRef};
pub use types::{ColumnData, ColumnType, Field, TableSchema, Value};

/// Rows per block when a plan does not say otherwise.
pub const DEFAULT_BLOCK_CAPACITY: usize = 1024;
