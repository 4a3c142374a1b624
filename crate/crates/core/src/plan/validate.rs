//! Static checks on plan trees.
//!
//! Each node is typed as positional (with its covered tables) or tuple (with
//! its schema). The checks mirror what the operators need at runtime, plus
//! the rules that keep positional recursion sound: a positional recursion
//! covers a single table, and nothing below it may produce generated values
//! that have no table position to point at.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use super::{resolve_attr, PlanNode, PlanSpec};
use crate::exec::JoinSide;
use crate::expr::Expr;
use crate::types::{ColumnType, Field, TableSchema};

pub type SchemaCatalog = BTreeMap<String, TableSchema>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RuleId {
    /// A tuple operator fed by a positional child or vice versa.
    MixedRepresentation,
    /// Positional recursion over more than one table, or a different one.
    MultiTablePositions,
    /// A generated value below a positional recursion.
    ComputedInPositional,
    /// A leaf-to-root path without exactly one materialization point.
    NoMaterializationPoint,
    UnknownColumn,
    UnknownTable,
    /// A positional join asked to output a table its probe does not cover.
    TableNotCovered,
    /// Join key or predicate column is not int32, or arithmetic on varchar.
    TypeError,
    /// Seed and recursive branch of a tuple recursion disagree on schema.
    SchemaMismatch,
    /// A recursive branch without exactly one `cte`, or a `cte` outside one.
    CteUnbound,
    InvalidCapacity,
}

impl RuleId {
    pub fn as_str(&self) -> &'static str {
        match self {
            RuleId::MixedRepresentation => "MIXED_REPRESENTATION",
            RuleId::MultiTablePositions => "MULTI_TABLE_POSITIONS",
            RuleId::ComputedInPositional => "COMPUTED_IN_POSITIONAL",
            RuleId::NoMaterializationPoint => "NO_MATERIALIZATION_POINT",
            RuleId::UnknownColumn => "UNKNOWN_COLUMN",
            RuleId::UnknownTable => "UNKNOWN_TABLE",
            RuleId::TableNotCovered => "TABLE_NOT_COVERED",
            RuleId::TypeError => "TYPE_ERROR",
            RuleId::SchemaMismatch => "SCHEMA_MISMATCH",
            RuleId::CteUnbound => "CTE_UNBOUND",
            RuleId::InvalidCapacity => "INVALID_CAPACITY",
        }
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    /// Dotted path from the root, e.g. `root.recursive.build`.
    pub path: String,
    pub rule: RuleId,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at {}: {}", self.rule, self.path, self.message)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Typed {
    Positions(Vec<String>),
    Tuples(Vec<Field>),
    /// Already diagnosed; suppresses follow-on errors.
    Invalid,
}

struct Frame {
    shape: Typed,
    ctes: usize,
}

struct Checker<'a> {
    catalog: &'a SchemaCatalog,
    diags: Vec<Diagnostic>,
    frames: Vec<Frame>,
    /// Nesting depth of positional recursions around the current node.
    positional_depth: usize,
}

impl Checker<'_> {
    fn report(&mut self, path: &str, rule: RuleId, message: String) {
        self.diags.push(Diagnostic { path: path.to_string(), rule, message });
    }

    fn positional_child(&mut self, path: &str, node: &PlanNode, child: Typed) -> Option<Vec<String>> {
        match child {
            Typed::Positions(t) => Some(t),
            Typed::Tuples(_) => {
                self.report(
                    path,
                    RuleId::MixedRepresentation,
                    format!("{} expects a positional input, got tuples", node.op_name()),
                );
                None
            }
            Typed::Invalid => None,
        }
    }

    fn tuple_child(&mut self, path: &str, node: &PlanNode, child: Typed) -> Option<Vec<Field>> {
        match child {
            Typed::Tuples(s) => Some(s),
            Typed::Positions(_) => {
                self.report(
                    path,
                    RuleId::MixedRepresentation,
                    format!("{} expects a tuple input, got positions", node.op_name()),
                );
                None
            }
            Typed::Invalid => None,
        }
    }

    /// Type of a positional attribute, reporting unknown tables or columns.
    fn attr_type(&mut self, path: &str, tables: &[String], attr: &str) -> Option<(String, ColumnType)> {
        let (table, column) = match resolve_attr(tables, attr) {
            Ok((table, column, _)) => (table, column),
            Err(msg) => {
                self.report(path, RuleId::UnknownColumn, msg);
                return None;
            }
        };
        let Some(schema) = self.catalog.get(&table) else {
            self.report(path, RuleId::UnknownTable, format!("table `{table}` is not in the catalog"));
            return None;
        };
        match schema.column_index(&column) {
            Some(i) => Some((schema.columns[i].name.clone(), schema.columns[i].ty)),
            None => {
                self.report(path, RuleId::UnknownColumn, format!("`{table}` has no column `{column}`"));
                None
            }
        }
    }

    fn expr_type(&mut self, path: &str, schema: &[Field], expr: &Expr) -> Option<ColumnType> {
        match expr.result_type(schema) {
            Ok(t) => Some(t),
            Err(crate::error::Error::UnknownColumn(c)) => {
                self.report(path, RuleId::UnknownColumn, format!("unknown column `{c}` in `{expr}`"));
                None
            }
            Err(e) => {
                self.report(path, RuleId::TypeError, e.to_string());
                None
            }
        }
    }

    fn int_column(&mut self, path: &str, schema: &[Field], name: &str, what: &str) -> Option<()> {
        match schema.iter().find(|f| f.name == name) {
            None => {
                self.report(path, RuleId::UnknownColumn, format!("{what} `{name}` not in input schema"));
                None
            }
            Some(f) if !f.ty.is_int() => {
                self.report(path, RuleId::TypeError, format!("{what} `{name}` is {}", f.ty));
                None
            }
            Some(_) => Some(()),
        }
    }

    fn generated_here(&mut self, path: &str, what: &str) -> Option<()> {
        if self.positional_depth > 0 {
            self.report(
                path,
                RuleId::ComputedInPositional,
                format!("generated column {what} below a positional recursion has no table position"),
            );
            return None;
        }
        Some(())
    }

    fn check(&mut self, node: &PlanNode, path: &str) -> Typed {
        self.check_node(node, path).unwrap_or(Typed::Invalid)
    }

    /// `None` means a diagnostic was already reported for this subtree.
    fn check_node(&mut self, node: &PlanNode, path: &str) -> Option<Typed> {
        let child_path = |name: &str| format!("{path}.{name}");
        let typed = match node {
            PlanNode::Scan { table } => {
                if !self.catalog.contains_key(table) {
                    self.report(path, RuleId::UnknownTable, format!("table `{table}` is not in the catalog"));
                    return None;
                }
                Typed::Positions(alloc::vec![table.clone()])
            }
            PlanNode::PosFilter { predicate, input } => {
                let child = self.check(input, &child_path("input"));
                let tables = self.positional_child(path, node, child)?;
                let (_, ty) = self.attr_type(path, &tables, &predicate.col)?;
                if !ty.is_int() {
                    self.report(path, RuleId::TypeError, format!("predicate `{predicate}` on {ty}"));
                    return None;
                }
                Typed::Positions(tables)
            }
            PlanNode::Materialize { attrs, computed, input } => {
                let child = self.check(input, &child_path("input"));
                let tables = self.positional_child(path, node, child)?;
                let mut fetched = Vec::new();
                for a in attrs {
                    let (name, ty) = self.attr_type(path, &tables, a)?;
                    fetched.push(Field::new(name, ty));
                }
                let mut out = fetched.clone();
                for c in computed {
                    self.generated_here(path, &format!("`{}` := {}", c.name, c.expr))?;
                    let ty = self.expr_type(path, &fetched, &c.expr)?;
                    out.push(Field::new(c.name.clone(), ty));
                }
                self.unique(path, out)?
            }
            PlanNode::TupleFilter { predicate, input } => {
                let child = self.check(input, &child_path("input"));
                let schema = self.tuple_child(path, node, child)?;
                self.int_column(path, &schema, &predicate.col, "predicate column")?;
                Typed::Tuples(schema)
            }
            PlanNode::Project { columns, input } => {
                let child = self.check(input, &child_path("input"));
                let schema = self.tuple_child(path, node, child)?;
                let mut out = Vec::new();
                for c in columns {
                    if c.expr.is_generated() {
                        self.generated_here(path, &format!("`{}` := {}", c.name, c.expr))?;
                    }
                    let ty = self.expr_type(path, &schema, &c.expr)?;
                    out.push(Field::new(c.name.clone(), ty));
                }
                self.unique(path, out)?
            }
            PlanNode::ThashJoin { build_key, probe_key, output, build, probe } => {
                let b = self.check(build, &child_path("build"));
                let p = self.check(probe, &child_path("probe"));
                let b = self.tuple_child(path, node, b);
                let p = self.tuple_child(path, node, p);
                let (b, p) = (b?, p?);
                self.int_column(path, &b, build_key, "build key")?;
                self.int_column(path, &p, probe_key, "probe key")?;
                let mut out = Vec::new();
                for o in output {
                    let side = match o.side {
                        JoinSide::Build => &b,
                        JoinSide::Probe => &p,
                    };
                    let Some(f) = side.iter().find(|f| f.name == o.column) else {
                        self.report(
                            path,
                            RuleId::UnknownColumn,
                            format!("join output `{}` not in {:?} side", o.column, o.side),
                        );
                        return None;
                    };
                    out.push(Field::new(o.output_name(), f.ty));
                }
                self.unique(path, out)?
            }
            PlanNode::PhashJoin { build_key, probe_key, output_table, build, probe } => {
                let b = self.check(build, &child_path("build"));
                let p = self.check(probe, &child_path("probe"));
                let probe_tables = self.positional_child(path, node, p);
                match b {
                    Typed::Positions(tables) => {
                        let (_, ty) = self.attr_type(path, &tables, build_key)?;
                        if !ty.is_int() {
                            self.report(path, RuleId::TypeError, format!("build key `{build_key}` is {ty}"));
                            return None;
                        }
                    }
                    Typed::Tuples(schema) => self.int_column(path, &schema, build_key, "build key")?,
                    Typed::Invalid => return None,
                }
                let probe_tables = probe_tables?;
                if !probe_tables.iter().any(|t| t == output_table) {
                    self.report(
                        path,
                        RuleId::TableNotCovered,
                        format!("probe covers {probe_tables:?}, not output table `{output_table}`"),
                    );
                    return None;
                }
                let key = if probe_key.contains('.') {
                    probe_key.clone()
                } else {
                    format!("{output_table}.{probe_key}")
                };
                let (_, ty) = self.attr_type(path, &probe_tables, &key)?;
                if !ty.is_int() {
                    self.report(path, RuleId::TypeError, format!("probe key `{probe_key}` is {ty}"));
                    return None;
                }
                Typed::Positions(alloc::vec![output_table.clone()])
            }
            PlanNode::Trecursive { seed, recursive, .. } => {
                let s = self.check(seed, &child_path("seed"));
                let seed_schema = self.tuple_child(path, node, s)?;
                self.frames.push(Frame { shape: Typed::Tuples(seed_schema.clone()), ctes: 0 });
                let r = self.check(recursive, &child_path("recursive"));
                let frame = self.frames.pop().expect("frame pushed above");
                self.cte_count(path, frame.ctes)?;
                let rec_schema = self.tuple_child(path, node, r)?;
                if rec_schema != seed_schema {
                    self.report(
                        path,
                        RuleId::SchemaMismatch,
                        format!(
                            "seed columns {:?} differ from recursive columns {:?}",
                            field_names(&seed_schema),
                            field_names(&rec_schema)
                        ),
                    );
                    return None;
                }
                Typed::Tuples(seed_schema)
            }
            PlanNode::Precursive { output_table, seed, recursive, .. } => {
                if !self.catalog.contains_key(output_table) {
                    self.report(path, RuleId::UnknownTable, format!("table `{output_table}` is not in the catalog"));
                    return None;
                }
                self.positional_depth += 1;
                let s = self.check(seed, &child_path("seed"));
                let expected = alloc::vec![output_table.clone()];
                self.frames.push(Frame { shape: Typed::Positions(expected.clone()), ctes: 0 });
                let r = self.check(recursive, &child_path("recursive"));
                let frame = self.frames.pop().expect("frame pushed above");
                self.positional_depth -= 1;
                let seed_tables = self.positional_child(path, node, s);
                let rec_tables = self.positional_child(path, node, r);
                self.cte_count(path, frame.ctes)?;
                let (seed_tables, rec_tables) = (seed_tables?, rec_tables?);
                for (role, tables) in [("seed", &seed_tables), ("recursive", &rec_tables)] {
                    if *tables != expected {
                        self.report(
                            path,
                            RuleId::MultiTablePositions,
                            format!("{role} covers {tables:?}; positional recursion needs only `{output_table}`"),
                        );
                        return None;
                    }
                }
                Typed::Positions(expected)
            }
            PlanNode::Cte => match self.frames.last_mut() {
                Some(frame) => {
                    frame.ctes += 1;
                    frame.shape.clone()
                }
                None => {
                    self.report(path, RuleId::CteUnbound, "cte outside a recursive branch".to_string());
                    return None;
                }
            },
        };
        Some(typed)
    }

    fn cte_count(&mut self, path: &str, ctes: usize) -> Option<()> {
        if ctes == 1 {
            Some(())
        } else {
            self.report(path, RuleId::CteUnbound, format!("recursive branch has {ctes} cte nodes, expected 1"));
            None
        }
    }

    fn unique(&mut self, path: &str, fields: Vec<Field>) -> Option<Typed> {
        for (i, f) in fields.iter().enumerate() {
            if fields[..i].iter().any(|g| g.name == f.name) {
                self.report(path, RuleId::SchemaMismatch, format!("duplicate output column `{}`", f.name));
                return None;
            }
        }
        Some(Typed::Tuples(fields))
    }
}

fn field_names(fields: &[Field]) -> Vec<&str> {
    fields.iter().map(|f| f.name.as_str()).collect()
}

/// Number of materialization points crossed on every leaf-to-node path.
/// `tuple_ctes` says, per enclosing recursion, whether its cte leaf already
/// yields tuples.
fn path_crossings(node: &PlanNode, tuple_ctes: &mut Vec<bool>, out: &mut Vec<(String, usize)>, path: &str) {
    let own = usize::from(matches!(node, PlanNode::Materialize { .. }));
    let start = out.len();
    match node {
        PlanNode::Scan { .. } => out.push((path.to_string(), 0)),
        PlanNode::Cte => out.push((path.to_string(), usize::from(tuple_ctes.last().copied().unwrap_or(false)))),
        PlanNode::Trecursive { seed, recursive, .. } | PlanNode::Precursive { seed, recursive, .. } => {
            path_crossings(seed, tuple_ctes, out, &format!("{path}.seed"));
            tuple_ctes.push(matches!(node, PlanNode::Trecursive { .. }));
            path_crossings(recursive, tuple_ctes, out, &format!("{path}.recursive"));
            tuple_ctes.pop();
        }
        PlanNode::PhashJoin { build, probe, .. } => {
            // Build rows only contribute join keys; nothing from them flows
            // upward, so their paths restart as positional at the join.
            let b = out.len();
            path_crossings(build, tuple_ctes, out, &format!("{path}.build"));
            for entry in &mut out[b..] {
                entry.1 = 0;
            }
            path_crossings(probe, tuple_ctes, out, &format!("{path}.probe"));
        }
        _ => {
            for (name, child) in node.children() {
                path_crossings(child, tuple_ctes, out, &format!("{path}.{name}"));
            }
        }
    }
    for entry in &mut out[start..] {
        entry.1 += own;
    }
}

/// Checks `spec` against the table schemas in `catalog`. Returns all
/// diagnostics; an empty list means the plan can be instantiated.
pub fn validate_plan(spec: &PlanSpec, catalog: &SchemaCatalog) -> Result<(), Vec<Diagnostic>> {
    let mut checker = Checker { catalog, diags: Vec::new(), frames: Vec::new(), positional_depth: 0 };
    if spec.block_capacity == 0 {
        checker.report("root", RuleId::InvalidCapacity, "block_capacity must be at least 1".to_string());
    }
    for t in &spec.tables {
        if !catalog.contains_key(t) {
            checker.report("tables", RuleId::UnknownTable, format!("table `{t}` is not in the catalog"));
        }
    }
    let root = checker.check(&spec.root, "root");
    let mut diags = checker.diags;
    if diags.is_empty() {
        let mut leaves = Vec::new();
        path_crossings(&spec.root, &mut Vec::new(), &mut leaves, "root");
        for (leaf, crossings) in leaves {
            if crossings != 1 {
                diags.push(Diagnostic {
                    path: leaf,
                    rule: RuleId::NoMaterializationPoint,
                    message: format!("path to the root crosses {crossings} materialization points, expected 1"),
                });
            }
        }
        debug_assert!(!diags.is_empty() || matches!(root, Typed::Tuples(_)));
    }
    if diags.is_empty() {
        Ok(())
    } else {
        Err(diags)
    }
}
