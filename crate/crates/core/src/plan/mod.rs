//! Query plans: the JSON-serializable plan tree, its validator, the
//! experiment templates and instantiation into operators.

mod build;
mod templates;
mod validate;

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use build::{instantiate, resolve_attr, Catalog};
pub use templates::{build_template, Engine, Experiment, SeedPredicate, TemplateQuery, EDGES};
pub use validate::{validate_plan, Diagnostic, RuleId, SchemaCatalog};

use crate::exec::JoinOutput;
use crate::expr::{Computed, Predicate};

fn default_capacity() -> usize {
    crate::DEFAULT_BLOCK_CAPACITY
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanSpec {
    pub tables: Vec<String>,
    #[serde(default = "default_capacity")]
    pub block_capacity: usize,
    pub root: PlanNode,
}

/// One operator of a plan tree. Positional attributes may be written as
/// `column` (when the block covers a single table) or `table.column`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum PlanNode {
    Scan {
        table: String,
    },
    PosFilter {
        predicate: Predicate,
        input: Box<PlanNode>,
    },
    Materialize {
        attrs: Vec<String>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        computed: Vec<Computed>,
        input: Box<PlanNode>,
    },
    TupleFilter {
        predicate: Predicate,
        input: Box<PlanNode>,
    },
    Project {
        columns: Vec<Computed>,
        input: Box<PlanNode>,
    },
    ThashJoin {
        build_key: String,
        probe_key: String,
        output: Vec<JoinOutput>,
        build: Box<PlanNode>,
        probe: Box<PlanNode>,
    },
    PhashJoin {
        build_key: String,
        probe_key: String,
        output_table: String,
        build: Box<PlanNode>,
        probe: Box<PlanNode>,
    },
    Trecursive {
        max_depth: u32,
        seed: Box<PlanNode>,
        recursive: Box<PlanNode>,
    },
    Precursive {
        max_depth: u32,
        output_table: String,
        seed: Box<PlanNode>,
        recursive: Box<PlanNode>,
    },
    Cte,
}

/// Every `op` tag a plan document may use.
pub const OP_NAMES: &[&str] = &[
    "scan",
    "pos_filter",
    "materialize",
    "tuple_filter",
    "project",
    "thash_join",
    "phash_join",
    "trecursive",
    "precursive",
    "cte",
];

impl PlanNode {
    pub fn op_name(&self) -> &'static str {
        match self {
            PlanNode::Scan { .. } => "scan",
            PlanNode::PosFilter { .. } => "pos_filter",
            PlanNode::Materialize { .. } => "materialize",
            PlanNode::TupleFilter { .. } => "tuple_filter",
            PlanNode::Project { .. } => "project",
            PlanNode::ThashJoin { .. } => "thash_join",
            PlanNode::PhashJoin { .. } => "phash_join",
            PlanNode::Trecursive { .. } => "trecursive",
            PlanNode::Precursive { .. } => "precursive",
            PlanNode::Cte => "cte",
        }
    }

    /// Children with the field names used in node paths.
    pub fn children(&self) -> Vec<(&'static str, &PlanNode)> {
        match self {
            PlanNode::Scan { .. } | PlanNode::Cte => Vec::new(),
            PlanNode::PosFilter { input, .. }
            | PlanNode::Materialize { input, .. }
            | PlanNode::TupleFilter { input, .. }
            | PlanNode::Project { input, .. } => alloc::vec![("input", &**input)],
            PlanNode::ThashJoin { build, probe, .. } | PlanNode::PhashJoin { build, probe, .. } => {
                alloc::vec![("build", &**build), ("probe", &**probe)]
            }
            PlanNode::Trecursive { seed, recursive, .. } | PlanNode::Precursive { seed, recursive, .. } => {
                alloc::vec![("seed", &**seed), ("recursive", &**recursive)]
            }
        }
    }

    pub fn node_count(&self) -> usize {
        1 + self.children().iter().map(|(_, c)| c.node_count()).sum::<usize>()
    }

    /// Depth-first search for the first node satisfying `pred`.
    pub fn find(&self, pred: &mut dyn FnMut(&PlanNode) -> bool) -> Option<&PlanNode> {
        if pred(self) {
            return Some(self);
        }
        self.children().into_iter().find_map(|(_, c)| c.find(pred))
    }
}
