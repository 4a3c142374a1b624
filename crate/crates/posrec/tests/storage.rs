use std::fs;
use std::path::Path;
use std::sync::Arc;

use posrec::dataset::{csv_path, read_oracle_table, write_dataset};
use posrec::storage::{load_csv, load_csv_with_cache, read_schema, ColumnTable, PageCache, PAGE_SIZE};
use posrec::PosrecError;
use posrec_core::datagen::GenConfig;
use posrec_core::{ColumnSource, Error, TableSchema, Value};
use proptest::prelude::*;

const FIXTURE: &str = "id,from,to,name\n0,0,1,a\n1,0,2,bb\n2,1,3,ccc\n";

fn fixture(dir: &Path, csv: &str) -> posrec::Result<ColumnTable> {
    let path = dir.join("in.csv");
    fs::write(&path, csv).unwrap();
    load_csv(&path, &TableSchema::edges("edges", 0), &dir.join("out"))
}

/// Independent reader: plain string splitting, no csv crate.
fn naive_rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn three_row_fixture_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let t = fixture(tmp.path(), FIXTURE).unwrap();
    assert_eq!(t.row_count(), 3);
    let files = fs::read_dir(tmp.path().join("out")).unwrap().filter(|e| {
        e.as_ref().unwrap().path().extension().is_some_and(|x| x == "pcol")
    });
    assert_eq!(files.count(), 4);
    let all = [0, 1, 2];
    for (c, name) in ["id", "from", "to", "name"].iter().enumerate() {
        let got: Vec<String> = t.read_slots(name, &all).unwrap().iter().map(Value::to_string).collect();
        let want: Vec<String> = naive_rows(FIXTURE).iter().map(|r| r[c].clone()).collect();
        assert_eq!(got, want, "column {name}");
    }
}

#[test]
fn read_slots_examples() {
    let tmp = tempfile::tempdir().unwrap();
    let t = fixture(tmp.path(), FIXTURE).unwrap();
    assert_eq!(t.read_slots("to", &[0, 2]).unwrap(), vec![Value::Int(1), Value::Int(3)]);
    assert_eq!(t.read_slots("to", &[]).unwrap(), vec![]);
    assert_eq!(t.read_slots("from", &[1, 1]).unwrap(), vec![Value::Int(0), Value::Int(0)]);
    assert_eq!(t.values_read("to").unwrap(), 2);
    assert_eq!(t.values_read("from").unwrap(), 2);
    assert!(matches!(t.read_slots("to", &[3]), Err(PosrecError::Core(Error::PositionOutOfRange { .. }))));
    assert!(matches!(t.read_slots("nope", &[0]), Err(PosrecError::Core(Error::UnknownColumn(_)))));
}

#[test]
fn header_only_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let t = fixture(tmp.path(), "id,from,to,name\n").unwrap();
    assert_eq!(t.row_count(), 0);
}

#[test]
fn load_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let long = fixture(tmp.path(), "id,from,to,name\n0,0,1,averylongname12345678\n");
    assert!(matches!(long, Err(PosrecError::Core(Error::ValueOverflow(_)))), "{long:?}");
    let big = fixture(tmp.path(), "id,from,to,name\n0,0,4294967296,a\n");
    assert!(matches!(big, Err(PosrecError::Core(Error::ValueOverflow(_)))), "{big:?}");
    let header = fixture(tmp.path(), "id,to,from,name\n");
    assert!(matches!(header, Err(PosrecError::Core(Error::SchemaMismatch(_)))));
    let arity = fixture(tmp.path(), "id,from,to,name\n0,0,1\n");
    assert!(matches!(arity, Err(PosrecError::Core(Error::SchemaMismatch(_)))));
}

#[test]
fn corrupt_column_file_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    fixture(tmp.path(), FIXTURE).unwrap();
    let out = tmp.path().join("out");
    let col = out.join("to.pcol");
    let mut bytes = fs::read(&col).unwrap();
    bytes.pop();
    fs::write(&col, &bytes).unwrap();
    assert!(matches!(ColumnTable::open(&out, PageCache::shared_default()), Err(PosrecError::Format { .. })));
    bytes[0] = b'X';
    fs::write(&col, &bytes).unwrap();
    assert!(matches!(ColumnTable::open(&out, PageCache::shared_default()), Err(PosrecError::Format { .. })));
}

#[test]
fn schema_json_layout() {
    let tmp = tempfile::tempdir().unwrap();
    fixture(tmp.path(), FIXTURE).unwrap();
    let text = fs::read_to_string(tmp.path().join("out/schema.json")).unwrap();
    let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(doc["table_name"], "edges");
    assert_eq!(doc["columns"][0], serde_json::json!({"name": "id", "type": "int32"}));
    assert_eq!(doc["columns"][3], serde_json::json!({"name": "name", "type": "varchar", "max_len": 15}));
    assert_eq!(read_schema(&tmp.path().join("out")).unwrap(), TableSchema::edges("edges", 0));
}

#[test]
fn cache_never_exceeds_capacity_and_cold_restart_clears() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    // ~4,000 rows of 20-byte payload: several pages per varchar column.
    write_dataset(&GenConfig::random(4000, 2, 3), dir).unwrap();
    let schema = read_schema(dir).unwrap();
    let cache = Arc::new(PageCache::new(3).unwrap());
    let t = load_csv_with_cache(&csv_path(dir), &schema, dir, cache.clone()).unwrap();
    let all: Vec<u32> = (0..t.row_count() as u32).rev().collect();
    for name in ["c1", "c2", "name", "id"] {
        t.read_slots(name, &all).unwrap();
        assert!(cache.resident() <= 3);
    }
    assert!(cache.misses() > 3);
    let pages_c1 = (t.row_count() * 20).div_ceil(PAGE_SIZE);
    assert!(pages_c1 > 1, "fixture must straddle pages");
    let cold = t.reopen_cold().unwrap();
    assert_eq!(cache.resident(), 0);
    assert_eq!(cold.read_slots("c1", &all).unwrap(), t.read_slots("c1", &all).unwrap());
}

#[test]
fn concurrent_readers_share_the_cache() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    write_dataset(&GenConfig::random(3000, 1, 5), dir).unwrap();
    let cache = Arc::new(PageCache::new(2).unwrap());
    let t = Arc::new(load_csv_with_cache(&csv_path(dir), &read_schema(dir).unwrap(), dir, cache.clone()).unwrap());
    let all: Vec<u32> = (0..t.row_count() as u32).collect();
    let want = t.read_slots("c1", &all).unwrap();
    std::thread::scope(|s| {
        for _ in 0..4 {
            s.spawn(|| assert_eq!(t.read_slots("c1", &all).unwrap(), want));
        }
    });
    assert!(cache.resident() <= 2);
    assert_eq!(t.values_read("c1").unwrap(), 5 * all.len() as u64);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn generated_datasets_round_trip(nodes in 1u32..1500, payload in 0usize..4, seed in any::<u64>(), cache_pages in 1usize..5) {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path();
        write_dataset(&GenConfig::random(nodes, payload, seed), dir).unwrap();
        let oracle = read_oracle_table(dir).unwrap();
        let cache = Arc::new(PageCache::new(cache_pages).unwrap());
        let t = load_csv_with_cache(&csv_path(dir), &read_schema(dir).unwrap(), dir, cache.clone()).unwrap();
        prop_assert_eq!(t.row_count(), oracle.rows.len());
        let all: Vec<u32> = (0..t.row_count() as u32).collect();
        for (c, name) in oracle.columns.iter().enumerate() {
            let got = t.read_slots(name, &all).unwrap();
            let want: Vec<Value> = oracle.rows.iter().map(|r| r[c].clone()).collect();
            prop_assert_eq!(got, want);
            prop_assert!(cache.resident() <= cache_pages);
        }
    }
}
