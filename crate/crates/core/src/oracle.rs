//! Brute-force recursive-CTE evaluator used as ground truth.
//!
//! Deliberately naive and self-contained: rows are plain value vectors, each
//! level is a nested-loop join of the previous level against the whole
//! table, and duplicates are kept (UNION ALL). Nothing here may depend on
//! the execution operators.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::expr::Predicate;
use crate::types::Value;

/// An in-memory table: column names plus rows of values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl OracleTable {
    pub fn column(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::UnknownColumn(String::from(name)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleRow {
    /// Index of the row in the input table.
    pub row_id: usize,
    pub level: u32,
    pub values: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct OracleResult {
    /// `levels[0]` are the seed rows; `levels[k + 1]` joins `levels[k]`.
    pub levels: Vec<Vec<OracleRow>>,
}

impl OracleResult {
    pub fn flattened(&self) -> Vec<&OracleRow> {
        self.levels.iter().flatten().collect()
    }

    pub fn row_count(&self) -> usize {
        self.levels.iter().map(Vec::len).sum()
    }

    /// The first `max_depth + 1` levels, i.e. the result for a smaller bound.
    pub fn truncated(&self, max_depth: u32) -> OracleResult {
        OracleResult { levels: self.levels.iter().take(max_depth as usize + 1).cloned().collect() }
    }

    /// Result rows restricted to `columns` of `table`, optionally followed by
    /// the level as a trailing int column.
    pub fn project(&self, table: &OracleTable, columns: &[&str], with_depth: bool) -> Result<Vec<Vec<Value>>> {
        let idx: Vec<usize> = columns.iter().map(|c| table.column(c)).collect::<Result<_>>()?;
        Ok(self
            .flattened()
            .into_iter()
            .map(|r| {
                let mut v: Vec<Value> = idx.iter().map(|&i| r.values[i].clone()).collect();
                if with_depth {
                    v.push(Value::Int(r.level as i32));
                }
                v
            })
            .collect())
    }
}

fn int_at(row: &[Value], i: usize) -> Result<i32> {
    row[i]
        .as_int()
        .ok_or_else(|| Error::ExpressionTypeError(format!("column #{i} is not an int")))
}

/// Evaluates
///
/// ```text
/// seed  = rows matching `seed`
/// level(k + 1) = { t in table, p in level(k) : t.from_col = p.to_col }
/// ```
///
/// for levels `0..=max_depth`, stopping early on an empty level.
pub fn oracle_eval(
    table: &OracleTable,
    seed: &Predicate,
    from_col: &str,
    to_col: &str,
    max_depth: u32,
) -> Result<OracleResult> {
    let seed_col = table.column(&seed.col)?;
    let from = table.column(from_col)?;
    let to = table.column(to_col)?;

    let mut level = Vec::new();
    for (row_id, row) in table.rows.iter().enumerate() {
        if seed.matches(int_at(row, seed_col)?) {
            level.push(OracleRow { row_id, level: 0, values: row.clone() });
        }
    }
    let mut result = OracleResult::default();
    let mut depth = 0;
    while !level.is_empty() {
        let mut next = Vec::new();
        if depth < max_depth {
            for prior in &level {
                let target = int_at(&prior.values, to)?;
                for (row_id, row) in table.rows.iter().enumerate() {
                    if int_at(row, from)? == target {
                        next.push(OracleRow { row_id, level: depth + 1, values: row.clone() });
                    }
                }
            }
        }
        result.levels.push(level);
        level = next;
        depth += 1;
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn edges(list: &[(i32, i32)]) -> OracleTable {
        OracleTable {
            columns: vec!["id".into(), "from".into(), "to".into()],
            rows: list
                .iter()
                .enumerate()
                .map(|(i, &(f, t))| vec![Value::Int(i as i32), Value::Int(f), Value::Int(t)])
                .collect(),
        }
    }

    fn ids(levels: &OracleResult) -> Vec<Vec<usize>> {
        levels.levels.iter().map(|l| l.iter().map(|r| r.row_id).collect()).collect()
    }

    #[test]
    fn three_edge_fixture() {
        let t = edges(&[(0, 1), (0, 2), (1, 3)]);
        let r = oracle_eval(&t, &Predicate::eq("from", 0), "from", "to", 1).unwrap();
        assert_eq!(ids(&r), vec![vec![0, 1], vec![2]]);
        let r = oracle_eval(&t, &Predicate::eq("from", 0), "from", "to", 0).unwrap();
        assert_eq!(ids(&r), vec![vec![0, 1]]);
    }

    #[test]
    fn diamond_keeps_duplicates() {
        // a=0 -> b=1, a -> c=2, b -> d=3, c -> d, d -> e=4
        let t = edges(&[(0, 1), (0, 2), (1, 3), (2, 3), (3, 4)]);
        let r = oracle_eval(&t, &Predicate::eq("from", 0), "from", "to", 2).unwrap();
        assert_eq!(ids(&r), vec![vec![0, 1], vec![2, 3], vec![4, 4]]);
        assert_eq!(r.truncated(1).row_count(), 4);
    }

    #[test]
    fn projection_with_depth() {
        let t = edges(&[(0, 1), (1, 2)]);
        let r = oracle_eval(&t, &Predicate::eq("from", 0), "from", "to", 5).unwrap();
        assert_eq!(r.levels.len(), 2);
        let rows = r.project(&t, &["to"], true).unwrap();
        assert_eq!(rows, vec![vec![Value::Int(1), Value::Int(0)], vec![Value::Int(2), Value::Int(1)]]);
    }
}
