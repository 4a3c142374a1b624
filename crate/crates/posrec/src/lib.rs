//! Storage, plan files, oracle verification, benchmarks and the `posrec`
//! command line on top of [`posrec_core`].

pub mod dataset;
pub mod error;
pub mod harness;
pub mod planfile;
pub mod storage;

pub use error::{PosrecError, Result};
pub use harness::{run_plan, verify, BenchConfig, BenchReport, Database, Query, RunMetrics, RunOptions, VerifyReport};
pub use planfile::parse_plan;
pub use storage::{load_csv, ColumnTable, PageCache};
