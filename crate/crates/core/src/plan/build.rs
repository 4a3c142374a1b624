use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::rc::Rc;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::{validate_plan, PlanNode, PlanSpec, SchemaCatalog};
use crate::blocks::{AttributeReader, Materializer, PositionBlock, TupleBlock};
use crate::error::{Error, Result};
use crate::exec::{
    BuildInput, DataSource, Materialize, PHashJoin, PosFilter, PositionOp, Project, THashJoin, TupleFilter, TupleOp,
};
use crate::metrics::QueryMetrics;
use crate::recursion::{CteBinding, PRecursive, RecursiveConfig, TRecursive};
use crate::source::TableRef;

pub type Catalog = BTreeMap<String, TableRef>;

/// Splits `attr` (`column` or `table.column`) against the tables covered by
/// a position block, returning `(table, column, slot)`.
pub fn resolve_attr(tables: &[String], attr: &str) -> core::result::Result<(String, String, usize), String> {
    match attr.split_once('.') {
        Some((table, column)) => match tables.iter().position(|t| t == table) {
            Some(slot) => Ok((table.to_string(), column.to_string(), slot)),
            None => Err(format!("`{attr}`: table `{table}` not covered by {tables:?}")),
        },
        None if tables.len() == 1 => Ok((tables[0].clone(), attr.to_string(), 0)),
        None => Err(format!("`{attr}` is ambiguous over {tables:?}; qualify it as table.column")),
    }
}

enum Binding {
    Tuples(CteBinding<TupleBlock>),
    Positions(CteBinding<PositionBlock>),
}

struct Builder<'a> {
    catalog: &'a Catalog,
    capacity: usize,
    metrics: Rc<QueryMetrics>,
    bindings: Vec<Binding>,
}

/// Validates `spec` and builds its operator tree. The root produces tuples.
pub fn instantiate(spec: &PlanSpec, catalog: &Catalog, metrics: Rc<QueryMetrics>) -> Result<TupleOp> {
    let schemas: SchemaCatalog = catalog.iter().map(|(k, t)| (k.clone(), t.schema().clone())).collect();
    validate_plan(spec, &schemas).map_err(Error::InvalidPlan)?;
    let mut b = Builder { catalog, capacity: spec.block_capacity, metrics, bindings: Vec::new() };
    b.tuples(&spec.root)
}

impl Builder<'_> {
    fn table(&self, name: &str) -> Result<TableRef> {
        self.catalog.get(name).cloned().ok_or_else(|| Error::UnknownTable(name.to_string()))
    }

    fn reader(&self, tables: &[String], attr: &str) -> Result<AttributeReader> {
        let (table, column, slot) = resolve_attr(tables, attr).map_err(Error::UnknownColumn)?;
        AttributeReader::new(self.table(&table)?, &column, slot, &self.metrics)
    }

    fn positions(&mut self, node: &PlanNode) -> Result<PositionOp> {
        Ok(match node {
            PlanNode::Scan { table } => Box::new(DataSource::new(self.table(table)?, self.capacity)?),
            PlanNode::PosFilter { predicate, input } => {
                let child = self.positions(input)?;
                let reader = self.reader(&child.shape(), &predicate.col)?;
                let mut predicate = predicate.clone();
                predicate.col = reader.field().name.clone();
                Box::new(PosFilter::new(child, reader, predicate)?)
            }
            PlanNode::PhashJoin { build_key, probe_key, output_table, build, probe } => {
                let build = match self.representation_of(build) {
                    Rep::Positions => {
                        let op = self.positions(build)?;
                        let key = self.reader(&op.shape(), build_key)?;
                        BuildInput::Positions { op, key }
                    }
                    Rep::Tuples => BuildInput::Tuples { op: self.tuples(build)?, key: build_key.clone() },
                };
                let probe = self.positions(probe)?;
                let key = if probe_key.contains('.') {
                    probe_key.clone()
                } else {
                    format!("{output_table}.{probe_key}")
                };
                let probe_key = self.reader(&probe.shape(), &key)?;
                Box::new(PHashJoin::new(build, probe, probe_key, output_table, self.capacity, self.metrics.clone())?)
            }
            PlanNode::Precursive { max_depth, output_table, seed, recursive } => {
                let seed = self.positions(seed)?;
                let binding = CteBinding::new(seed.shape());
                self.bindings.push(Binding::Positions(binding));
                let branch = self.positions(recursive);
                let Some(Binding::Positions(binding)) = self.bindings.pop() else {
                    unreachable!("binding pushed above")
                };
                let cfg = RecursiveConfig::positional(*max_depth, output_table.clone());
                Box::new(PRecursive::new(seed, branch?, binding, &cfg, self.metrics.clone())?)
            }
            PlanNode::Cte => match self.bindings.last() {
                Some(Binding::Positions(b)) => Box::new(b.cte()),
                Some(Binding::Tuples(_)) => {
                    return Err(Error::TableMismatch("positional cte under a tuple recursion".to_string()))
                }
                None => return Err(Error::CteUnbound),
            },
            other => {
                return Err(Error::InvalidConfig(format!("`{}` does not produce positions", other.op_name())))
            }
        })
    }

    fn tuples(&mut self, node: &PlanNode) -> Result<TupleOp> {
        Ok(match node {
            PlanNode::Materialize { attrs, computed, input } => {
                let child = self.positions(input)?;
                let tables = child.shape();
                let readers = attrs.iter().map(|a| self.reader(&tables, a)).collect::<Result<Vec<_>>>()?;
                let m = Materializer::new(readers, computed.clone(), self.metrics.clone())?;
                Box::new(Materialize::new(child, m))
            }
            PlanNode::TupleFilter { predicate, input } => {
                Box::new(TupleFilter::new(self.tuples(input)?, predicate.clone())?)
            }
            PlanNode::Project { columns, input } => Box::new(Project::new(self.tuples(input)?, columns.clone())?),
            PlanNode::ThashJoin { build_key, probe_key, output, build, probe } => {
                let build = self.tuples(build)?;
                let probe = self.tuples(probe)?;
                Box::new(THashJoin::new(
                    build,
                    probe,
                    build_key,
                    probe_key,
                    output,
                    self.capacity,
                    self.metrics.clone(),
                )?)
            }
            PlanNode::Trecursive { max_depth, seed, recursive } => {
                let seed = self.tuples(seed)?;
                self.bindings.push(Binding::Tuples(CteBinding::new(seed.shape())));
                let branch = self.tuples(recursive);
                let Some(Binding::Tuples(binding)) = self.bindings.pop() else {
                    unreachable!("binding pushed above")
                };
                Box::new(TRecursive::new(seed, branch?, binding, &RecursiveConfig::tuple(*max_depth), self.metrics.clone())?)
            }
            PlanNode::Cte => match self.bindings.last() {
                Some(Binding::Tuples(b)) => Box::new(b.cte()),
                Some(Binding::Positions(_)) => {
                    return Err(Error::SchemaMismatch("tuple cte under a positional recursion".to_string()))
                }
                None => return Err(Error::CteUnbound),
            },
            other => return Err(Error::InvalidConfig(format!("`{}` does not produce tuples", other.op_name()))),
        })
    }

    fn representation_of(&self, node: &PlanNode) -> Rep {
        match node {
            PlanNode::Scan { .. } | PlanNode::PosFilter { .. } | PlanNode::PhashJoin { .. } | PlanNode::Precursive { .. } => {
                Rep::Positions
            }
            PlanNode::Cte => match self.bindings.last() {
                Some(Binding::Positions(_)) => Rep::Positions,
                _ => Rep::Tuples,
            },
            _ => Rep::Tuples,
        }
    }
}

enum Rep {
    Positions,
    Tuples,
}
