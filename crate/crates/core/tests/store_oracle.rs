//! Store queries against a brute-force scan, and export/import round trips.

mod common;

use cmdb_core::store::Store;
use common::oracle::{filter_matrix, query_all, scan};

#[test]
fn query_equals_scan_and_survives_round_trip() {
    let records = common::seeded_records(10_000, 7);
    let store = Store::open_in_memory().unwrap();
    for r in &records {
        store.upsert_record(r).unwrap();
    }
    assert_eq!(store.count().unwrap(), 10_000);
    let matrix = filter_matrix();
    let before: Vec<Vec<String>> = matrix.iter().map(|f| query_all(&store, f)).collect();
    for (f, got) in matrix.iter().zip(&before) {
        assert_eq!(got, &scan(&records, f), "{f:?}");
    }
    assert!(before.iter().filter(|r| !r.is_empty()).count() > matrix.len() / 2);

    let mut buf = Vec::new();
    assert_eq!(store.export_jsonl(&mut buf).unwrap(), 10_000);
    let restored = Store::open_in_memory().unwrap();
    assert_eq!(restored.import_jsonl(&buf[..]).unwrap(), 10_000);
    for (f, want) in matrix.iter().zip(&before) {
        assert_eq!(&query_all(&restored, f), want, "{f:?}");
    }
    assert_eq!(restored.all_records().unwrap(), store.all_records().unwrap());

    // importing the same export again changes nothing
    restored.import_jsonl(&buf[..]).unwrap();
    assert_eq!(restored.count().unwrap(), 10_000);
}

#[test]
fn export_file_round_trip() {
    let records = common::seeded_records(200, 11);
    let store = Store::open_in_memory().unwrap();
    for r in &records {
        store.upsert_record(r).unwrap();
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("dump.cmdb.jsonl");
    store.export_to_path(&path).unwrap();
    let disk = Store::open(&dir.path().join("copy.sqlite")).unwrap();
    disk.import_from_path(&path).unwrap();
    assert_eq!(disk.all_records().unwrap(), store.all_records().unwrap());
}
