//! Record store properties: persistence round trips, idempotent and
//! order-independent ingest, atomic batches, and tensor assembly.

use metainf_core::perfdb::{RecordFormat, RecordStore, WireRecord};
use metainf_core::{MethodConfig, PerformanceRecord};
use proptest::prelude::*;

fn record_strategy() -> impl Strategy<Value = PerformanceRecord> {
    (0usize..4, 0usize..8, 0usize..3, 1u32..1_000_000, proptest::option::of(0u32..1000)).prop_map(|(t, m, h, rt, sd)| {
        let mut r = PerformanceRecord::new(
            format!("task-{t}"),
            MethodConfig::from_index(m).unwrap(),
            format!("hw{h}"),
            f64::from(rt) / 1000.0,
        );
        r.runtime_std_s = sd.map(|s| f64::from(s) / 100.0);
        r
    })
}

/// Distinct keys only, so that no batch conflicts with itself.
fn records_strategy() -> impl Strategy<Value = Vec<PerformanceRecord>> {
    proptest::collection::vec(record_strategy(), 1..60).prop_map(|rs| {
        let mut seen = std::collections::HashSet::new();
        rs.into_iter().filter(|r| seen.insert(r.key())).collect()
    })
}

fn jsonl(records: &[PerformanceRecord]) -> String {
    records
        .iter()
        .map(|r| serde_json::to_string(&WireRecord::from(r)).unwrap() + "\n")
        .collect()
}

fn csv_text(records: &[PerformanceRecord]) -> String {
    let mut out = String::from("task,prefix_caching,chunked_prefill,continuous_batching,hardware,runtime_s,runtime_std_s\n");
    for r in records {
        let [pc, cp, cb] = r.method.flags();
        let sd = r.runtime_std_s.map(|s| format!("{s:?}")).unwrap_or_default();
        out += &format!("{},{pc},{cp},{cb},{},{:?},{sd}\n", r.task, r.hardware, r.runtime_s);
    }
    out
}

fn store_of(records: &[PerformanceRecord]) -> RecordStore {
    let mut s = RecordStore::new();
    s.ingest(jsonl(records).as_bytes(), RecordFormat::Jsonl).unwrap();
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn save_and_load_round_trip(records in records_strategy()) {
        let store = store_of(&records);
        let mut buf = Vec::new();
        store.write_to(&mut buf).unwrap();
        let back = RecordStore::read_from(buf.as_slice()).unwrap();
        prop_assert_eq!(back, store);
    }

    #[test]
    fn ingest_is_idempotent(records in records_strategy()) {
        let mut store = store_of(&records);
        let before = store.clone();
        store.ingest(jsonl(&records).as_bytes(), RecordFormat::Jsonl).unwrap();
        prop_assert_eq!(store, before);
    }

    #[test]
    fn tensor_ignores_ingest_order(records in records_strategy()) {
        let mut reversed = records.clone();
        reversed.reverse();
        let a = store_of(&records).assemble_tensor().unwrap();
        let b = store_of(&reversed).assemble_tensor().unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn tensor_cells_are_the_records(records in records_strategy()) {
        let t = store_of(&records).assemble_tensor().unwrap();
        for r in &records {
            prop_assert_eq!(t.lookup(&r.task, r.method, &r.hardware), Some(r.runtime_s));
        }
        let (n, m, h) = t.shape();
        prop_assert_eq!(t.missing_count(), n * m * h - records.len());
    }

    #[test]
    fn csv_and_jsonl_agree(records in records_strategy()) {
        let mut from_csv = RecordStore::new();
        from_csv.ingest(csv_text(&records).as_bytes(), RecordFormat::Csv).unwrap();
        prop_assert_eq!(from_csv, store_of(&records));
    }

    #[test]
    fn bad_batch_leaves_store_untouched(records in records_strategy(), cut in 0usize..60) {
        let mut store = store_of(&records[..records.len() / 2]);
        let before = store.clone();
        let mut text = jsonl(&records);
        let at = cut.min(records.len());
        let mut lines: Vec<&str> = text.lines().collect();
        lines.insert(at, "{\"task\": oops}");
        text = lines.join("\n");
        prop_assert!(store.ingest(text.as_bytes(), RecordFormat::Jsonl).is_err());
        prop_assert_eq!(store, before);
    }

    #[test]
    fn conflicting_runtime_is_rejected_atomically(records in records_strategy()) {
        let mut store = store_of(&records);
        let before = store.clone();
        let mut changed = records[0].clone();
        changed.runtime_s += 1.0;
        let mut batch = records[1..].to_vec();
        batch.push(changed);
        prop_assert!(store.ingest(jsonl(&batch).as_bytes(), RecordFormat::Jsonl).is_err());
        prop_assert_eq!(store, before);
    }
}
