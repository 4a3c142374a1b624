use std::collections::BTreeMap;

use posrec_core::plan::{
    build_template, validate_plan, Engine, Experiment, PlanNode, PlanSpec, RuleId, SchemaCatalog, SeedPredicate, EDGES,
};
use posrec_core::{Computed, Expr, Predicate, TableSchema};

fn catalog() -> SchemaCatalog {
    BTreeMap::from([
        (EDGES.to_string(), TableSchema::edges(EDGES, 2)),
        ("nodes".to_string(), TableSchema::edges("nodes", 0)),
    ])
}

fn spec(root: PlanNode) -> PlanSpec {
    PlanSpec { tables: vec![EDGES.into()], block_capacity: 64, root }
}

fn scan(t: &str) -> Box<PlanNode> {
    Box::new(PlanNode::Scan { table: t.into() })
}

fn prec(seed: Box<PlanNode>, recursive: Box<PlanNode>) -> Box<PlanNode> {
    Box::new(PlanNode::Precursive { max_depth: 3, output_table: EDGES.into(), seed, recursive })
}

fn phash(build: Box<PlanNode>, probe: Box<PlanNode>) -> Box<PlanNode> {
    Box::new(PlanNode::PhashJoin {
        build_key: "to".into(),
        probe_key: "from".into(),
        output_table: EDGES.into(),
        build,
        probe,
    })
}

fn materialize(attrs: &[&str], computed: Vec<Computed>, input: Box<PlanNode>) -> Box<PlanNode> {
    Box::new(PlanNode::Materialize { attrs: attrs.iter().map(|s| s.to_string()).collect(), computed, input })
}

fn rules(root: PlanNode) -> Vec<RuleId> {
    match validate_plan(&spec(root), &catalog()) {
        Ok(()) => vec![],
        Err(d) => d.into_iter().map(|d| d.rule).collect(),
    }
}

#[test]
fn positional_template_accepted() {
    let q = build_template(Experiment::E1, Engine::Prec, 4, 0, SeedPredicate::From);
    assert_eq!(validate_plan(&q.plan, &catalog()), Ok(()));
}

#[test]
fn materialized_recursive_branch_is_mixed() {
    let branch = materialize(&["id", "from", "to"], vec![], phash(Box::new(PlanNode::Cte), scan(EDGES)));
    let root = materialize(&["id"], vec![], prec(scan(EDGES), branch));
    assert_eq!(rules(*root), vec![RuleId::MixedRepresentation]);
}

#[test]
fn generated_value_in_positional_branch() {
    let value = Expr::add_const(Expr::mul_const(Expr::col("to"), 2), 1);
    let keys = materialize(&["to"], vec![Computed::new("key", value)], Box::new(PlanNode::Cte));
    let branch = Box::new(PlanNode::PhashJoin {
        build_key: "key".into(),
        probe_key: "from".into(),
        output_table: EDGES.into(),
        build: keys,
        probe: scan(EDGES),
    });
    let root = materialize(&["id"], vec![], prec(scan(EDGES), branch));
    assert_eq!(rules(*root), vec![RuleId::ComputedInPositional]);
}

#[test]
fn foreign_table_positions_rejected() {
    let root = materialize(&["id"], vec![], prec(scan("nodes"), phash(Box::new(PlanNode::Cte), scan(EDGES))));
    assert_eq!(rules(*root), vec![RuleId::MultiTablePositions]);
}

#[test]
fn missing_materialization_point() {
    assert_eq!(rules(*scan(EDGES)), vec![RuleId::NoMaterializationPoint]);
}

#[test]
fn unknown_column_reported() {
    let root = materialize(&["nope"], vec![], scan(EDGES));
    assert_eq!(rules(*root), vec![RuleId::UnknownColumn]);
    let filtered = Box::new(PlanNode::PosFilter { predicate: Predicate::eq("depth", 0), input: scan(EDGES) });
    assert_eq!(rules(*materialize(&["id"], vec![], filtered)), vec![RuleId::UnknownColumn]);
}

#[test]
fn cte_outside_recursion() {
    assert_eq!(rules(*materialize(&["id"], vec![], Box::new(PlanNode::Cte))), vec![RuleId::CteUnbound]);
}

#[test]
fn templates_never_trip_rejection_rules() {
    for e in Experiment::ALL {
        for g in Engine::ALL {
            for seed in [SeedPredicate::From, SeedPredicate::Id] {
                let q = build_template(e, g, 5, 2, seed);
                assert_eq!(validate_plan(&q.plan, &catalog()), Ok(()), "{e} {g:?}");
            }
        }
    }
}
