use alloc::string::String;
use alloc::vec::Vec;

use crate::plan::Diagnostic;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("value overflow: {0}")]
    ValueOverflow(String),
    #[error("position {position} out of range for {row_count} rows")]
    PositionOutOfRange { position: u64, row_count: u64 },
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("unknown table `{0}`")]
    UnknownTable(String),
    #[error("table `{0}` is not covered by the position block")]
    TableNotCovered(String),
    #[error("expression type error: {0}")]
    ExpressionTypeError(String),
    #[error("join key `{0}` is not int32")]
    KeyTypeError(String),
    #[error("table mismatch: {0}")]
    TableMismatch(String),
    #[error("cte node is not bound to a recursive operator")]
    CteUnbound,
    #[error("protocol violation: {0}")]
    ProtocolViolation(&'static str),
    #[error("storage error: {0}")]
    Storage(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("plan rejected with {} diagnostic(s)", .0.len())]
    InvalidPlan(Vec<Diagnostic>),
}
