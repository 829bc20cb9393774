#[path = "../tests/common/mod.rs"]
mod common;
fn main() {
    let records = common::seeded_records(10000, 7);
    let store = cmdb_core::store::Store::open_in_memory().unwrap();
    let t = std::time::Instant::now();
    for r in &records { store.upsert_record(r).unwrap(); }
    println!("insert {:?}", t.elapsed());
    for text in [None, Some("zzzz".to_string())] {
    let t = std::time::Instant::now();
    let mut f = cmdb_core::store::QueryFilter { text, page_size: 500, ..Default::default() };
    for p in 1..=20 { f.page = p; store.query_models(&f).unwrap(); }
    println!("20 pages {:?}", t.elapsed());
    }
    let t = std::time::Instant::now();
    for r in &records { serde_json::from_str::<cmdb_core::ConstitutiveModelRecord>(&serde_json::to_string(r).unwrap()).unwrap(); }
    println!("json 10k {:?}", t.elapsed());
}
