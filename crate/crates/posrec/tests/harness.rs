use std::fs;
use std::path::Path;

use posrec::dataset::write_dataset;
use posrec::harness::{
    bench, oracle_levels, run_plan, verify, verify_against, BenchConfig, Database, DiffKind, FaultInjection, Query,
    RunOptions,
};
use posrec::planfile::plan_to_json;
use posrec::storage::write_schema;
use posrec::{parse_plan, PosrecError};
use posrec_core::datagen::GenConfig;
use posrec_core::plan::{build_template, Engine, Experiment, RuleId, SeedPredicate};
use posrec_core::TableSchema;

fn three_edges(dir: &Path) -> Database {
    fs::write(dir.join("edges.csv"), "id,from,to,name\n0,0,1,a\n1,0,2,b\n2,1,3,c\n").unwrap();
    write_schema(dir, &TableSchema::edges("edges", 0)).unwrap();
    Database::open(dir).unwrap()
}

#[test]
fn fixture_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let mut db = three_edges(tmp.path());
    let (plan, _) = Query::new(Experiment::E1, Engine::Prec, 1, 0).plan();
    let out = run_plan(&plan, &mut db, RunOptions::default()).unwrap();
    assert_eq!(out.metrics.result_rows, 3);
    assert_eq!(out.metrics.payload_values_read, 0);
    let (plan, _) = Query::new(Experiment::E1, Engine::Trec, 0, 0).plan();
    let out = run_plan(&plan, &mut db, RunOptions { cold: true, level_trace: false }).unwrap();
    assert_eq!(out.rows().len(), 2);
}

#[test]
fn invalid_plan_is_not_executed() {
    let tmp = tempfile::tempdir().unwrap();
    let mut db = three_edges(tmp.path());
    let spec = parse_plan(r#"{"tables":["edges"],"root":{"op":"scan","table":"edges"}}"#).unwrap();
    let err = run_plan(&spec, &mut db, RunOptions::default()).unwrap_err();
    let diags = err.diagnostics().expect("diagnostics");
    assert_eq!(diags[0].rule, RuleId::NoMaterializationPoint);
    assert_eq!(db.table().values_read("from").unwrap(), 0);
}

#[test]
fn all_templates_verify_on_balanced_tree() {
    let tmp = tempfile::tempdir().unwrap();
    write_dataset(&GenConfig::balanced(3, 5, 2, 11), tmp.path()).unwrap();
    let mut db = Database::open(tmp.path()).unwrap();
    let table = db.oracle_table().unwrap();
    for seed in [SeedPredicate::From, SeedPredicate::Id] {
        let oracle = oracle_levels(&table, seed, 6).unwrap();
        for depth in 0..=6 {
            for e in Experiment::ALL {
                for g in Engine::ALL {
                    let q = Query { seed, ..Query::new(e, g, depth, 2) };
                    let r = verify_against(&mut db, &table, &oracle, &q, FaultInjection::default()).unwrap();
                    assert!(r.pass, "{r}");
                }
            }
        }
    }
    // Past the height the recursion runs dry: every edge is reached once.
    let r = verify(&mut db, &Query::new(Experiment::E1, Engine::Prec, 9, 0), FaultInjection::default()).unwrap();
    assert!(r.pass);
    assert_eq!(r.engine_rows, db.edge_count());
}

#[test]
fn fault_injection_reports_one_missing_row() {
    let tmp = tempfile::tempdir().unwrap();
    write_dataset(&GenConfig::balanced(3, 3, 0, 1), tmp.path()).unwrap();
    let mut db = Database::open(tmp.path()).unwrap();
    let q = Query::new(Experiment::E1, Engine::Trec, 2, 0);
    let r = verify(&mut db, &q, FaultInjection { drop_rows: 1 }).unwrap();
    assert!(!r.pass);
    assert_eq!(r.diff_count, 1);
    assert_eq!(r.diffs[0].kind, DiffKind::Missing);
    assert_eq!(r.diffs[0].level, Some(2));
    let r = verify(&mut db, &q, FaultInjection { drop_rows: 15 }).unwrap();
    assert_eq!((r.diff_count, r.diffs.len()), (15, 10));
}

#[test]
fn bench_samples_and_depth_monotonicity() {
    let tmp = tempfile::tempdir().unwrap();
    write_dataset(&GenConfig::balanced(4, 4, 2, 3), tmp.path()).unwrap();
    let mut db = Database::open(tmp.path()).unwrap();
    let cfg = BenchConfig {
        experiments: vec![Experiment::E1],
        engines: Engine::ALL.to_vec(),
        depths: (0..=5).collect(),
        payloads: vec![0],
        repeats: 10,
        seed: SeedPredicate::From,
        cold: false,
    };
    let report = bench(&mut db, &cfg).unwrap();
    assert_eq!(report.rows.len(), 12);
    assert!(report.rows.iter().all(|r| r.metrics.wall_time_ns.len() == 10));
    for g in Engine::ALL {
        let rows: Vec<u64> = (0..=5).map(|d| report.find(Experiment::E1, g, d, 0).unwrap().metrics.result_rows).collect();
        assert!(rows.windows(2).all(|w| w[0] <= w[1]), "{rows:?}");
    }
    let out = tmp.path().join("bench.csv");
    let json = report.write(&out).unwrap();
    let csv = fs::read_to_string(&out).unwrap();
    assert!(csv.starts_with(
        "experiment,engine,depth,payload_n,edge_count,mean_ms,stddev_ms,result_rows,values_read_total,rows_materialized,hash_build_rows\n"
    ));
    assert_eq!(csv.lines().count(), 13);
    assert!(json.is_file());

    let too_wide = BenchConfig { payloads: vec![3], ..cfg };
    assert!(matches!(bench(&mut db, &too_wide), Err(PosrecError::Usage(_))));
}

#[test]
fn template_documents_round_trip() {
    for e in Experiment::ALL {
        for g in Engine::ALL {
            let plan = build_template(e, g, 4, 3, SeedPredicate::From).plan;
            assert_eq!(parse_plan(&plan_to_json(&plan)).unwrap(), plan);
        }
    }
}

#[test]
fn cli_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_posrec");
    let data = tmp.path().join("data");
    let cols = tmp.path().join("cols");
    let run = |args: &[&str]| std::process::Command::new(bin).args(args).output().unwrap();
    let d = data.to_str().unwrap();
    let gen = run(&["gen", "--mode", "random", "--nodes", "200", "--payload", "1", "--seed", "4", "--out", d]);
    assert!(gen.status.success(), "{}", String::from_utf8_lossy(&gen.stderr));
    let load = run(&[
        "load",
        "--csv",
        data.join("edges.csv").to_str().unwrap(),
        "--schema",
        data.join("schema.json").to_str().unwrap(),
        "--out",
        cols.to_str().unwrap(),
    ]);
    assert!(load.status.success());
    assert!(cols.join("c1.pcol").is_file());

    let plan_path = tmp.path().join("plan.json");
    let plan = build_template(Experiment::E2, Engine::Prec, 3, 1, SeedPredicate::From).plan;
    fs::write(&plan_path, plan_to_json(&plan)).unwrap();
    let metrics = tmp.path().join("m.json");
    let out = run(&[
        "run",
        "--plan",
        plan_path.to_str().unwrap(),
        "--data",
        cols.to_str().unwrap(),
        "--metrics",
        metrics.to_str().unwrap(),
        "--cold",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.lines().next(), Some("id,from,to,c1"));
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(&metrics).unwrap()).unwrap();
    assert_eq!(m["result_rows"].as_u64().unwrap() as usize, stdout.lines().count() - 1);

    let ok = run(&["verify", "--experiment", "3", "--engine", "trec", "--depth", "4", "--payload", "1", "--data", d]);
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stdout));
    let ok = run(&["verify", "--experiment", "2", "--engine", "prec", "--depth", "2", "--data", d, "--seed-predicate", "id"]);
    assert!(ok.status.success());
    let bad = run(&["verify", "--experiment", "1", "--engine", "prec", "--depth", "2", "--data", d, "--inject-drop-rows", "1"]);
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stdout).contains("Missing level="));

    fs::write(&plan_path, r#"{"tables":["edges"],"root":{"op":"sort"}}"#).unwrap();
    let unknown = run(&["run", "--plan", plan_path.to_str().unwrap(), "--data", d]);
    assert!(!unknown.status.success());
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("unknown op `sort`"));
}
