//! Built-in plans for the three benchmark queries over the `edges` table.
//!
//! Every query walks outgoing edges from the seed rows: level `k + 1` joins
//! `edges.from` with the `to` of level `k`. The experiments differ only in
//! which columns travel through the recursion and when payload is read.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;
use alloc::vec;

use serde::{Deserialize, Serialize};

use super::{PlanNode, PlanSpec};
use crate::exec::{JoinOutput, JoinSide};
use crate::expr::{CmpOp, Computed, Expr, Predicate};
use crate::types::payload_column;

pub const EDGES: &str = "edges";
const DEPTH: &str = "depth";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Experiment {
    /// Structural columns only.
    E1,
    /// Payload columns carried through the recursion.
    E2,
    /// Payload joined back once after the recursion.
    E3,
}

impl Experiment {
    pub const ALL: [Experiment; 3] = [Experiment::E1, Experiment::E2, Experiment::E3];

    pub fn number(self) -> u8 {
        match self {
            Experiment::E1 => 1,
            Experiment::E2 => 2,
            Experiment::E3 => 3,
        }
    }

    pub fn from_number(n: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.number() == n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Trec,
    Prec,
}

impl Engine {
    pub const ALL: [Engine; 2] = [Engine::Trec, Engine::Prec];

    pub fn name(self) -> &'static str {
        match self {
            Engine::Trec => "trec",
            Engine::Prec => "prec",
        }
    }
}

/// Which column selects the seed rows (always compared with 0).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeedPredicate {
    Id,
    #[default]
    From,
}

impl SeedPredicate {
    pub fn predicate(self) -> Predicate {
        match self {
            SeedPredicate::Id => Predicate::eq("id", 0),
            SeedPredicate::From => Predicate::eq("from", 0),
        }
    }
}

/// A template plan plus the edge columns its rows carry, in output order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateQuery {
    pub plan: PlanSpec,
    pub output_columns: Vec<String>,
}

fn strings(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| String::from(*s)).collect()
}

fn payload(n: usize) -> Vec<String> {
    (1..=n).map(payload_column).collect()
}

fn scan() -> Box<PlanNode> {
    Box::new(PlanNode::Scan { table: EDGES.into() })
}

fn cte() -> Box<PlanNode> {
    Box::new(PlanNode::Cte)
}

fn materialize(attrs: Vec<String>, computed: Vec<Computed>, input: Box<PlanNode>) -> Box<PlanNode> {
    Box::new(PlanNode::Materialize { attrs, computed, input })
}

fn passthrough(cols: &[String]) -> Vec<Computed> {
    cols.iter().map(|c| Computed::new(c.clone(), Expr::col(c.clone()))).collect()
}

fn probe_outputs(cols: &[String]) -> Vec<JoinOutput> {
    cols.iter().map(|c| JoinOutput::new(JoinSide::Probe, c.clone())).collect()
}

pub fn build_template(
    experiment: Experiment,
    engine: Engine,
    depth: u32,
    payload_cols: usize,
    seed: SeedPredicate,
) -> TemplateQuery {
    let pay = payload(payload_cols);
    let output_columns: Vec<String> = match experiment {
        Experiment::E1 => strings(&["id", "from", "to"]),
        Experiment::E2 => [strings(&["id", "from", "to"]), pay.clone()].concat(),
        Experiment::E3 => [strings(&["id", "to", "from"]), pay.clone()].concat(),
    };
    let seed_filter = || Box::new(PlanNode::PosFilter { predicate: seed.predicate(), input: scan() });

    let root = match engine {
        Engine::Prec => {
            let recursion = Box::new(PlanNode::Precursive {
                max_depth: depth,
                output_table: EDGES.into(),
                seed: seed_filter(),
                recursive: Box::new(PlanNode::PhashJoin {
                    build_key: "to".into(),
                    probe_key: "from".into(),
                    output_table: EDGES.into(),
                    build: cte(),
                    probe: scan(),
                }),
            });
            *materialize(output_columns.clone(), Vec::new(), recursion)
        }
        Engine::Trec => match experiment {
            Experiment::E1 => {
                let cols = strings(&["id", "from", "to"]);
                PlanNode::Trecursive {
                    max_depth: depth,
                    seed: materialize(cols.clone(), Vec::new(), seed_filter()),
                    recursive: Box::new(PlanNode::ThashJoin {
                        build_key: "to".into(),
                        probe_key: "from".into(),
                        output: probe_outputs(&cols),
                        build: cte(),
                        probe: materialize(cols, Vec::new(), scan()),
                    }),
                }
            }
            Experiment::E2 => {
                let cols = output_columns.clone();
                let recursion = Box::new(PlanNode::Trecursive {
                    max_depth: depth,
                    seed: materialize(cols.clone(), vec![Computed::new(DEPTH, Expr::ConstInt(0))], seed_filter()),
                    recursive: Box::new(PlanNode::Project {
                        columns: [
                            passthrough(&cols),
                            vec![Computed::new(DEPTH, Expr::add_const(Expr::col(DEPTH), 1))],
                        ]
                        .concat(),
                        input: depth_guarded_join(&cols, depth),
                    }),
                });
                PlanNode::Project { columns: passthrough(&cols), input: recursion }
            }
            Experiment::E3 => {
                let carried = strings(&["id", "to"]);
                let recursion = Box::new(PlanNode::Trecursive {
                    max_depth: depth,
                    seed: materialize(
                        carried.clone(),
                        vec![Computed::new(DEPTH, Expr::ConstInt(0))],
                        seed_filter(),
                    ),
                    recursive: Box::new(PlanNode::Project {
                        columns: [
                            passthrough(&carried),
                            vec![Computed::new(DEPTH, Expr::add_const(Expr::col(DEPTH), 1))],
                        ]
                        .concat(),
                        input: depth_guarded_join(&carried, depth),
                    }),
                });
                PlanNode::ThashJoin {
                    build_key: "id".into(),
                    probe_key: "id".into(),
                    output: probe_outputs(&output_columns),
                    build: recursion,
                    probe: materialize(output_columns.clone(), Vec::new(), scan()),
                }
            }
        },
    };
    TemplateQuery {
        plan: PlanSpec { tables: vec![String::from(EDGES)], block_capacity: crate::DEFAULT_BLOCK_CAPACITY, root },
        output_columns,
    }
}

/// `cte[depth < max] ⋈ edges` on `cte.to = edges.from`, emitting the probe's
/// `cols` plus the build's depth. The guard is redundant with `max_depth`
/// and kept so the depth column alone also bounds the recursion.
fn depth_guarded_join(cols: &[String], max_depth: u32) -> Box<PlanNode> {
    let mut probe_cols = cols.to_vec();
    if !probe_cols.iter().any(|c| c == "from") {
        probe_cols.push("from".into());
    }
    let guard = i32::try_from(max_depth).unwrap_or(i32::MAX);
    Box::new(PlanNode::ThashJoin {
        build_key: "to".into(),
        probe_key: "from".into(),
        output: [probe_outputs(cols), vec![JoinOutput::new(JoinSide::Build, DEPTH)]].concat(),
        build: Box::new(PlanNode::TupleFilter { predicate: Predicate::new(DEPTH, CmpOp::Lt, guard), input: cte() }),
        probe: materialize(probe_cols, Vec::new(), scan()),
    })
}

impl core::fmt::Display for Experiment {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "E{}", self.number())
    }
}
