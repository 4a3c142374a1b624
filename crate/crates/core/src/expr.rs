//! Scalar expressions and comparison predicates.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::borrow::Borrow;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{ColumnData, ColumnType, Field};

/// Integer-valued scalar expression over the columns of a tuple block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Expr {
    ConstInt(i32),
    Col(String),
    Add { expr: Box<Expr>, value: i32 },
    Mul { expr: Box<Expr>, value: i32 },
}

impl Expr {
    pub fn col(name: impl Into<String>) -> Self {
        Expr::Col(name.into())
    }

    pub fn add_const(expr: Expr, value: i32) -> Self {
        Expr::Add { expr: Box::new(expr), value }
    }

    pub fn mul_const(expr: Expr, value: i32) -> Self {
        Expr::Mul { expr: Box::new(expr), value }
    }

    /// True when the result is not a plain column reference, i.e. a value
    /// with no backing table position.
    pub fn is_generated(&self) -> bool {
        !matches!(self, Expr::Col(_))
    }

    pub fn referenced_columns<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Expr::ConstInt(_) => {}
            Expr::Col(c) => out.push(c),
            Expr::Add { expr, .. } | Expr::Mul { expr, .. } => expr.referenced_columns(out),
        }
    }

    pub fn result_type(&self, schema: &[Field]) -> Result<ColumnType> {
        match self {
            Expr::ConstInt(_) => Ok(ColumnType::Int32),
            Expr::Col(c) => lookup(schema, c).map(|(_, f)| f.ty),
            Expr::Add { expr, .. } | Expr::Mul { expr, .. } => match expr.result_type(schema)? {
                ColumnType::Int32 => Ok(ColumnType::Int32),
                other => Err(Error::ExpressionTypeError(format!(
                    "arithmetic on {other} operand in `{self}`"
                ))),
            },
        }
    }

    /// Evaluates the expression for every row of the given columns.
    pub fn eval<C: Borrow<ColumnData>>(
        &self,
        schema: &[Field],
        columns: &[C],
        rows: usize,
    ) -> Result<ColumnData> {
        match self {
            Expr::ConstInt(k) => Ok(ColumnData::Int32(alloc::vec![*k; rows])),
            Expr::Col(c) => {
                let (i, _) = lookup(schema, c)?;
                Ok(columns[i].borrow().clone())
            }
            Expr::Add { expr, value } | Expr::Mul { expr, value } => {
                let inner = expr.eval(schema, columns, rows)?;
                let ints = inner.ints().ok_or_else(|| {
                    Error::ExpressionTypeError(format!("arithmetic on varchar in `{self}`"))
                })?;
                let out = match self {
                    Expr::Add { .. } => ints.iter().map(|v| v.wrapping_add(*value)).collect(),
                    _ => ints.iter().map(|v| v.wrapping_mul(*value)).collect(),
                };
                Ok(ColumnData::Int32(out))
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::ConstInt(k) => write!(f, "{k}"),
            Expr::Col(c) => f.write_str(c),
            Expr::Add { expr, value } => write!(f, "({expr} + {value})"),
            Expr::Mul { expr, value } => write!(f, "({expr} * {value})"),
        }
    }
}

fn lookup<'a>(schema: &'a [Field], name: &str) -> Result<(usize, &'a Field)> {
    schema
        .iter()
        .enumerate()
        .find(|(_, f)| f.name == name)
        .ok_or_else(|| Error::UnknownColumn(String::from(name)))
}

/// A named output column computed from an expression.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Computed {
    pub name: String,
    pub expr: Expr,
}

impl Computed {
    pub fn new(name: impl Into<String>, expr: Expr) -> Self {
        Computed { name: name.into(), expr }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CmpOp {
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
}

impl CmpOp {
    pub fn apply(self, lhs: i32, rhs: i32) -> bool {
        match self {
            CmpOp::Eq => lhs == rhs,
            CmpOp::Lt => lhs < rhs,
            CmpOp::Le => lhs <= rhs,
        }
    }
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CmpOp::Eq => "=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
        })
    }
}

/// `col <op> literal` over an int32 column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Predicate {
    pub col: String,
    pub cmp: CmpOp,
    pub value: i32,
}

impl Predicate {
    pub fn new(col: impl Into<String>, cmp: CmpOp, value: i32) -> Self {
        Predicate { col: col.into(), cmp, value }
    }

    pub fn eq(col: impl Into<String>, value: i32) -> Self {
        Self::new(col, CmpOp::Eq, value)
    }

    pub fn matches(&self, v: i32) -> bool {
        self.cmp.apply(v, self.value)
    }

    /// Indices of the rows of `values` that satisfy the predicate.
    pub fn select(&self, values: &ColumnData) -> Result<Vec<u32>> {
        let ints = values.ints().ok_or_else(|| {
            Error::ExpressionTypeError(format!("predicate `{self}` compares a varchar column"))
        })?;
        Ok(ints
            .iter()
            .enumerate()
            .filter(|(_, &v)| self.matches(v))
            .map(|(i, _)| i as u32)
            .collect())
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.col, self.cmp, self.value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn schema() -> Vec<Field> {
        vec![Field::new("depth", ColumnType::Int32), Field::new("s", ColumnType::varchar(3))]
    }

    #[test]
    fn eval_arithmetic() {
        let cols = vec![
            ColumnData::Int32(vec![1, 2]),
            ColumnData::Varchar { width: 3, bytes: vec![b'a', 0, 0, b'b', 0, 0] },
        ];
        let e = Expr::add_const(Expr::mul_const(Expr::col("depth"), 2), 1);
        assert_eq!(e.eval(&schema(), &cols, 2).unwrap(), ColumnData::Int32(vec![3, 5]));
        assert_eq!(Expr::ConstInt(0).eval(&schema(), &cols, 2).unwrap(), ColumnData::Int32(vec![0, 0]));
        assert!(matches!(
            Expr::add_const(Expr::col("s"), 1).eval(&schema(), &cols, 2),
            Err(Error::ExpressionTypeError(_))
        ));
        assert!(matches!(Expr::col("x").result_type(&schema()), Err(Error::UnknownColumn(_))));
    }

    #[test]
    fn predicate_select() {
        let p = Predicate::new("depth", CmpOp::Lt, 4);
        assert_eq!(p.select(&ColumnData::Int32(vec![3, 4, 1])).unwrap(), vec![0, 2]);
        assert!(Predicate::new("d", CmpOp::Le, 2).matches(2));
        assert!(!Predicate::eq("d", 2).matches(3));
    }
}
