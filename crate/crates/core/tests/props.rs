use std::collections::BTreeMap;

use posrec_core::datagen::{generate_tree, GenConfig};
use posrec_core::exec::{drain, JoinOutput, JoinSide};
use posrec_core::plan::{build_template, instantiate, Catalog, Engine, Experiment, PlanNode, PlanSpec, SeedPredicate, EDGES};
use posrec_core::{ColumnType, Field, MemTable, QueryMetrics, TableSchema, Value};
use proptest::prelude::*;

fn kv_table(name: &str, rows: &[(i32, i32)]) -> posrec_core::TableRef {
    let schema =
        TableSchema::new(name, vec![Field::new("k", ColumnType::Int32), Field::new("v", ColumnType::Int32)]).unwrap();
    let rows: Vec<Vec<Value>> = rows.iter().map(|&(k, v)| vec![Value::Int(k), Value::Int(v)]).collect();
    MemTable::from_rows(schema, &rows).unwrap().into_ref()
}

fn scan(t: &str) -> Box<PlanNode> {
    Box::new(PlanNode::Scan { table: t.into() })
}

fn materialize(input: Box<PlanNode>) -> Box<PlanNode> {
    Box::new(PlanNode::Materialize { attrs: vec!["k".into(), "v".into()], computed: vec![], input })
}

fn execute(spec: &PlanSpec, catalog: &Catalog) -> Vec<Vec<Value>> {
    let mut op = instantiate(spec, catalog, QueryMetrics::new()).unwrap();
    op.open().unwrap();
    let rows = drain(&mut *op).unwrap().iter().flat_map(|b| b.rows()).collect();
    op.close();
    rows
}

fn pairs() -> impl Strategy<Value = Vec<(i32, i32)>> {
    prop::collection::vec((0..6i32, any::<i32>()), 0..40)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tuple_join_matches_nested_loop(build in pairs(), probe in pairs(), cap in 1usize..9) {
        let catalog: Catalog = BTreeMap::from([("l".into(), kv_table("l", &build)), ("r".into(), kv_table("r", &probe))]);
        let output = vec![
            JoinOutput::new(JoinSide::Probe, "k"),
            JoinOutput { side: JoinSide::Probe, column: "v".into(), alias: Some("pv".into()) },
            JoinOutput { side: JoinSide::Build, column: "v".into(), alias: Some("bv".into()) },
        ];
        let root = PlanNode::ThashJoin {
            build_key: "k".into(),
            probe_key: "k".into(),
            output,
            build: materialize(scan("l")),
            probe: materialize(scan("r")),
        };
        let spec = PlanSpec { tables: vec!["l".into(), "r".into()], block_capacity: cap, root };
        let mut want = Vec::new();
        for &(pk, pv) in &probe {
            for &(bk, bv) in &build {
                if pk == bk {
                    want.push(vec![Value::Int(pk), Value::Int(pv), Value::Int(bv)]);
                }
            }
        }
        prop_assert_eq!(execute(&spec, &catalog), want);
    }

    #[test]
    fn positional_join_matches_nested_loop(build in pairs(), probe in pairs(), cap in 1usize..9) {
        let catalog: Catalog = BTreeMap::from([("l".into(), kv_table("l", &build)), ("r".into(), kv_table("r", &probe))]);
        let join = Box::new(PlanNode::PhashJoin {
            build_key: "k".into(),
            probe_key: "k".into(),
            output_table: "r".into(),
            build: scan("l"),
            probe: scan("r"),
        });
        let spec = PlanSpec { tables: vec!["l".into(), "r".into()], block_capacity: cap, root: *materialize(join) };
        let mut want = Vec::new();
        for &(pk, pv) in &probe {
            for &(bk, _) in &build {
                if pk == bk {
                    want.push(vec![Value::Int(pk), Value::Int(pv)]);
                }
            }
        }
        prop_assert_eq!(execute(&spec, &catalog), want);
    }

    #[test]
    fn templates_are_block_size_independent_and_resettable(
        nodes in 1u32..300,
        seed in any::<u64>(),
        depth in 0u32..8,
        cap in 1usize..40,
        exp in 0usize..3,
        engine in 0usize..2,
    ) {
        let data = generate_tree(&GenConfig::random(nodes, 1, seed), EDGES).unwrap();
        let table = MemTable::from_rows(data.schema.clone(), &data.rows()).unwrap().into_ref();
        let catalog: Catalog = BTreeMap::from([(EDGES.to_string(), table)]);
        let mut plan = build_template(Experiment::ALL[exp], Engine::ALL[engine], depth, 1, SeedPredicate::From).plan;
        let reference = {
            let mut rows = execute(&plan, &catalog);
            rows.sort();
            rows
        };
        plan.block_capacity = cap;
        let mut op = instantiate(&plan, &catalog, QueryMetrics::new()).unwrap();
        op.open().unwrap();
        let first: Vec<Vec<Value>> = drain(&mut *op).unwrap().iter().flat_map(|b| b.rows()).collect();
        op.reset().unwrap();
        let second: Vec<Vec<Value>> = drain(&mut *op).unwrap().iter().flat_map(|b| b.rows()).collect();
        op.close();
        prop_assert_eq!(&first, &second);
        let mut sorted = first;
        sorted.sort();
        prop_assert_eq!(sorted, reference);
    }
}
