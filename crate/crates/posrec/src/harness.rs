//! Plan execution against a dataset directory, oracle verification and
//! benchmark sweeps.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use posrec_core::exec::drain;
use posrec_core::metrics::LevelEvent;
use posrec_core::oracle::{oracle_eval, OracleResult, OracleTable};
use posrec_core::plan::{build_template, instantiate, Catalog, Engine, Experiment, PlanSpec, SeedPredicate};
use posrec_core::types::is_payload_column;
use posrec_core::{ColumnSource, QueryMetrics, TableRef, TupleBlock, Value};
use serde::Serialize;

use crate::dataset::{csv_path, is_loaded, read_oracle_table};
use crate::error::{PosrecError, Result};
use crate::storage::{load_csv_with_cache, read_schema, ColumnTable, PageCache};

/// A dataset directory opened for querying.
#[derive(Debug)]
pub struct Database {
    dir: PathBuf,
    table: Arc<ColumnTable>,
}

impl Database {
    /// Opens `dir`, loading `edges.csv` into column files first when they
    /// are missing.
    pub fn open(dir: &Path) -> Result<Self> {
        Self::open_with_cache(dir, PageCache::shared_default())
    }

    pub fn open_with_cache(dir: &Path, cache: Arc<PageCache>) -> Result<Self> {
        let schema = read_schema(dir)?;
        let table = if is_loaded(dir, &schema) {
            ColumnTable::open(dir, cache)?
        } else {
            load_csv_with_cache(&csv_path(dir), &schema, dir, cache)?
        };
        Ok(Database { dir: dir.to_path_buf(), table: Arc::new(table) })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn table(&self) -> &Arc<ColumnTable> {
        &self.table
    }

    pub fn edge_count(&self) -> usize {
        self.table.row_count()
    }

    pub fn payload_columns(&self) -> usize {
        self.table.schema().columns.iter().filter(|f| is_payload_column(&f.name)).count()
    }

    pub fn catalog(&self) -> Catalog {
        let t: TableRef = self.table.clone();
        BTreeMap::from([(self.table.schema().table_name.clone(), t)])
    }

    /// Drops cached pages and reopens every column file.
    pub fn go_cold(&mut self) -> Result<()> {
        self.table = Arc::new(self.table.reopen_cold()?);
        Ok(())
    }

    pub fn oracle_table(&self) -> Result<OracleTable> {
        read_oracle_table(&self.dir)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Clear the page cache and reopen files before executing.
    pub cold: bool,
    /// Record the level of every block a recursive operator emits.
    pub level_trace: bool,
}

/// Counters of one execution. `wall_time_ns` holds one sample per
/// repetition; all other fields are deterministic for a given plan and
/// dataset.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RunMetrics {
    pub wall_time_ns: Vec<u64>,
    pub values_read: BTreeMap<String, u64>,
    pub values_read_total: u64,
    pub payload_values_read: u64,
    pub rows_materialized: u64,
    pub hash_build_rows: u64,
    pub result_rows: u64,
    pub peak_resident_blocks: u64,
}

impl RunMetrics {
    fn from_query(m: &QueryMetrics, result_rows: u64, elapsed_ns: u64) -> Self {
        RunMetrics {
            wall_time_ns: vec![elapsed_ns],
            values_read: m.values_read_all().into_iter().map(|(t, c, n)| (format!("{t}.{c}"), n)).collect(),
            values_read_total: m.values_read_total(),
            payload_values_read: m.values_read_where(|_, c| is_payload_column(c)),
            rows_materialized: m.rows_materialized(),
            hash_build_rows: m.hash_build_rows(),
            result_rows,
            peak_resident_blocks: m.peak_resident_blocks(),
        }
    }

    /// Equal ignoring timing samples.
    pub fn same_counters(&self, other: &RunMetrics) -> bool {
        RunMetrics { wall_time_ns: Vec::new(), ..self.clone() }
            == RunMetrics { wall_time_ns: Vec::new(), ..other.clone() }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub columns: Vec<String>,
    pub blocks: Vec<TupleBlock>,
    pub metrics: RunMetrics,
    /// Present when [`RunOptions::level_trace`] was set.
    pub levels: Option<Vec<LevelEvent>>,
}

impl RunOutput {
    pub fn rows(&self) -> Vec<Vec<Value>> {
        self.blocks.iter().flat_map(TupleBlock::rows).collect()
    }
}

/// Validates, instantiates and drains `plan`. Timing covers open through
/// close; loading and plan construction are excluded.
pub fn run_plan(plan: &PlanSpec, db: &mut Database, opts: RunOptions) -> Result<RunOutput> {
    if opts.cold {
        db.go_cold()?;
    }
    let metrics = if opts.level_trace { QueryMetrics::with_level_trace() } else { QueryMetrics::new() };
    let mut root = instantiate(plan, &db.catalog(), metrics.clone())?;
    let columns = root.shape().iter().map(|f| f.name.clone()).collect();
    let start = Instant::now();
    root.open()?;
    let blocks = drain(&mut *root);
    root.close();
    let elapsed = start.elapsed().as_nanos() as u64;
    let blocks = blocks?;
    let rows = blocks.iter().map(|b| b.len() as u64).sum();
    Ok(RunOutput {
        columns,
        blocks,
        metrics: RunMetrics::from_query(&metrics, rows, elapsed),
        levels: metrics.level_trace(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Query {
    pub experiment: Experiment,
    pub engine: Engine,
    pub depth: u32,
    pub payload: usize,
    pub seed: SeedPredicate,
    pub block_capacity: usize,
}

impl Query {
    pub fn new(experiment: Experiment, engine: Engine, depth: u32, payload: usize) -> Self {
        Query {
            experiment,
            engine,
            depth,
            payload,
            seed: SeedPredicate::default(),
            block_capacity: posrec_core::DEFAULT_BLOCK_CAPACITY,
        }
    }

    pub fn plan(&self) -> (PlanSpec, Vec<String>) {
        let mut q = build_template(self.experiment, self.engine, self.depth, self.payload, self.seed);
        q.plan.block_capacity = self.block_capacity;
        (q.plan, q.output_columns)
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}/{} depth={} N={} seed={:?} cap={}",
            self.experiment,
            self.engine.name(),
            self.depth,
            self.payload,
            self.seed,
            self.block_capacity
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffKind {
    /// In the oracle, not in the engine output.
    Missing,
    /// In the engine output, not in the oracle.
    Extra,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RowDiff {
    pub kind: DiffKind,
    /// Oracle level of a missing row.
    pub level: Option<u32>,
    pub row: Vec<String>,
}

impl fmt::Display for RowDiff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let level = self.level.map_or_else(|| "-".to_string(), |l| l.to_string());
        write!(f, "{:?} level={level} [{}]", self.kind, self.row.join(","))
    }
}

pub const MAX_REPORTED_DIFFS: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VerifyReport {
    pub query: String,
    pub pass: bool,
    pub engine_rows: usize,
    pub oracle_rows: usize,
    pub diff_count: usize,
    /// The first [`MAX_REPORTED_DIFFS`] differences.
    pub diffs: Vec<RowDiff>,
    /// Levels emitted by the recursive operator never decrease.
    pub bfs_ordered: bool,
    pub metrics: RunMetrics,
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{}: {} (engine {} rows, oracle {} rows, {} differences, bfs order {})",
            self.query,
            if self.pass { "PASS" } else { "FAIL" },
            self.engine_rows,
            self.oracle_rows,
            self.diff_count,
            if self.bfs_ordered { "ok" } else { "violated" }
        )?;
        for d in &self.diffs {
            writeln!(f, "  {d}")?;
        }
        Ok(())
    }
}

/// Test-only corruption of engine output before comparison.
#[derive(Debug, Clone, Copy, Default)]
pub struct FaultInjection {
    pub drop_rows: usize,
}

/// Oracle result for `seed` deep enough for every depth up to `max_depth`.
pub fn oracle_levels(table: &OracleTable, seed: SeedPredicate, max_depth: u32) -> Result<OracleResult> {
    Ok(oracle_eval(table, &seed.predicate(), "from", "to", max_depth)?)
}

/// Runs `query` and compares its rows with `oracle` (computed for at
/// least `query.depth`) as multisets.
pub fn verify_against(
    db: &mut Database,
    table: &OracleTable,
    oracle: &OracleResult,
    query: &Query,
    fault: FaultInjection,
) -> Result<VerifyReport> {
    let (plan, columns) = query.plan();
    let out = run_plan(&plan, db, RunOptions { cold: false, level_trace: true })?;
    let mut engine = out.rows();
    engine.truncate(engine.len().saturating_sub(fault.drop_rows));

    let truth = oracle.truncated(query.depth);
    let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
    let levels = truth.flattened().into_iter().map(|r| r.level);
    let mut expected: Vec<(Vec<Value>, u32)> = truth.project(table, &cols, false)?.into_iter().zip(levels).collect();
    expected.sort();
    engine.sort();
    let (diff_count, diffs) = multiset_diff(&engine, &expected);

    let trace = out.levels.unwrap_or_default();
    let bfs_ordered = trace.windows(2).all(|w| w[0].level <= w[1].level);
    Ok(VerifyReport {
        query: query.to_string(),
        pass: diff_count == 0 && bfs_ordered,
        engine_rows: engine.len(),
        oracle_rows: expected.len(),
        diff_count,
        diffs,
        bfs_ordered,
        metrics: out.metrics,
    })
}

/// Builds the oracle from `edges.csv` and verifies one query.
pub fn verify(db: &mut Database, query: &Query, fault: FaultInjection) -> Result<VerifyReport> {
    let table = db.oracle_table()?;
    let oracle = oracle_levels(&table, query.seed, query.depth)?;
    verify_against(db, &table, &oracle, query, fault)
}

fn multiset_diff(engine: &[Vec<Value>], expected: &[(Vec<Value>, u32)]) -> (usize, Vec<RowDiff>) {
    let show = |row: &[Value]| row.iter().map(Value::to_string).collect();
    let mut diffs = Vec::new();
    let mut count = 0;
    let mut push = |d: RowDiff| {
        count += 1;
        if diffs.len() < MAX_REPORTED_DIFFS {
            diffs.push(d);
        }
    };
    let (mut i, mut j) = (0, 0);
    while i < engine.len() || j < expected.len() {
        let ord = match (engine.get(i), expected.get(j)) {
            (Some(e), Some((o, _))) => e.cmp(o),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, _) => std::cmp::Ordering::Greater,
        };
        match ord {
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
            std::cmp::Ordering::Less => {
                push(RowDiff { kind: DiffKind::Extra, level: None, row: show(&engine[i]) });
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                let (row, level) = &expected[j];
                push(RowDiff { kind: DiffKind::Missing, level: Some(*level), row: show(row) });
                j += 1;
            }
        }
    }
    (count, diffs)
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub experiments: Vec<Experiment>,
    pub engines: Vec<Engine>,
    pub depths: Vec<u32>,
    pub payloads: Vec<usize>,
    pub repeats: usize,
    pub seed: SeedPredicate,
    /// Clear caches before every timed run instead of warming up once.
    pub cold: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub experiment: u8,
    pub engine: &'static str,
    pub depth: u32,
    pub payload_n: usize,
    pub edge_count: usize,
    pub mean_ms: f64,
    pub stddev_ms: f64,
    pub metrics: RunMetrics,
}

pub const BENCH_CSV_HEADER: &str = "experiment,engine,depth,payload_n,edge_count,mean_ms,stddev_ms,result_rows,values_read_total,rows_materialized,hash_build_rows";

impl BenchRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{:.3},{:.3},{},{},{},{}",
            self.experiment,
            self.engine,
            self.depth,
            self.payload_n,
            self.edge_count,
            self.mean_ms,
            self.stddev_ms,
            self.metrics.result_rows,
            self.metrics.values_read_total,
            self.metrics.rows_materialized,
            self.metrics.hash_build_rows
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(BENCH_CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.csv_line());
            out.push('\n');
        }
        out
    }

    pub fn find(&self, experiment: Experiment, engine: Engine, depth: u32, payload: usize) -> Option<&BenchRow> {
        self.rows.iter().find(|r| {
            r.experiment == experiment.number() && r.engine == engine.name() && r.depth == depth && r.payload_n == payload
        })
    }

    /// Writes the CSV to `out` and the full metrics next to it as
    /// `<out stem>.metrics.json`.
    pub fn write(&self, out: &Path) -> Result<PathBuf> {
        fs::write(out, self.to_csv()).map_err(|e| PosrecError::io(out, e))?;
        let json_path = out.with_extension("metrics.json");
        let json = serde_json::to_string_pretty(&self.rows).map_err(|e| PosrecError::Json(e.to_string()))?;
        fs::write(&json_path, json + "\n").map_err(|e| PosrecError::io(&json_path, e))?;
        Ok(json_path)
    }
}

fn mean_stddev_ms(samples: &[u64]) -> (f64, f64) {
    let ms: Vec<f64> = samples.iter().map(|&ns| ns as f64 / 1e6).collect();
    let n = ms.len() as f64;
    let mean = ms.iter().sum::<f64>() / n;
    let var = if ms.len() > 1 { ms.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt())
}

/// Runs every configuration of `cfg` sequentially on the calling thread.
pub fn bench(db: &mut Database, cfg: &BenchConfig) -> Result<BenchReport> {
    if cfg.repeats == 0 {
        return Err(PosrecError::Usage("repeats must be at least 1".into()));
    }
    let available = db.payload_columns();
    if let Some(&n) = cfg.payloads.iter().find(|&&n| n > available) {
        return Err(PosrecError::Usage(format!("payload {n} requested, dataset has {available} payload columns")));
    }
    let mut report = BenchReport::default();
    for &experiment in &cfg.experiments {
        for &engine in &cfg.engines {
            for &payload in &cfg.payloads {
                for &depth in &cfg.depths {
                    let query = Query { seed: cfg.seed, ..Query::new(experiment, engine, depth, payload) };
                    report.rows.push(bench_one(db, &query, cfg)?);
                }
            }
        }
    }
    Ok(report)
}

fn bench_one(db: &mut Database, query: &Query, cfg: &BenchConfig) -> Result<BenchRow> {
    let (plan, _) = query.plan();
    let opts = RunOptions { cold: cfg.cold, level_trace: false };
    if !cfg.cold {
        run_plan(&plan, db, opts)?;
    }
    let mut metrics: Option<RunMetrics> = None;
    let mut samples = Vec::with_capacity(cfg.repeats);
    for _ in 0..cfg.repeats {
        let out = run_plan(&plan, db, opts)?;
        samples.extend_from_slice(&out.metrics.wall_time_ns);
        match &metrics {
            None => metrics = Some(out.metrics),
            Some(first) if !first.same_counters(&out.metrics) => {
                return Err(PosrecError::Usage(format!("{query}: counters differ between repetitions")))
            }
            Some(_) => {}
        }
    }
    let mut metrics = metrics.expect("repeats >= 1");
    let (mean_ms, stddev_ms) = mean_stddev_ms(&samples);
    metrics.wall_time_ns = samples;
    Ok(BenchRow {
        experiment: query.experiment.number(),
        engine: query.engine.name(),
        depth: query.depth,
        payload_n: query.payload,
        edge_count: db.edge_count(),
        mean_ms,
        stddev_ms,
        metrics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diff_counts_both_directions() {
        let a = |x: i32| vec![Value::Int(x)];
        let engine = vec![a(1), a(2), a(2), a(5)];
        let expected = vec![(a(1), 0), (a(2), 1), (a(3), 1), (a(5), 2)];
        let (n, d) = multiset_diff(&engine, &expected);
        assert_eq!(n, 2);
        assert_eq!(d[0].kind, DiffKind::Extra);
        assert_eq!(d[1], RowDiff { kind: DiffKind::Missing, level: Some(1), row: vec!["3".into()] });
    }

    #[test]
    fn sample_stddev() {
        let (m, s) = mean_stddev_ms(&[1_000_000, 3_000_000]);
        assert!((m - 2.0).abs() < 1e-12 && (s - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(mean_stddev_ms(&[5_000_000]), (5.0, 0.0));
    }
}
