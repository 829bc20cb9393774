//! Provider faults on some documents never leak into the others, and every
//! job history follows the lifecycle graph.

mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use cmdb_core::agent::{CallMeta, ClientConfig, MockProvider, Provider, ProviderClient, ProviderError, ProviderRequest, ProviderResponse, Stage};
use cmdb_core::pipeline::JobState;
use cmdb_core::store::Store;
use proptest::prelude::*;
use serde_json::Value;

const DOCS: [&str; 8] = [
    "sandstone-damage",
    "lime-mortar-plasticity",
    "kaolinite-thixotropy",
    "brick-joint-shear",
    "earthen-moisture",
    "masonry-review",
    "graphene-thermal",
    "steel-fatigue",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Fault {
    Ok,
    Transient,
    Fatal,
    Garbage,
}

struct Faulty {
    inner: MockProvider,
    faults: BTreeMap<(String, Stage), Fault>,
}

impl Provider for Faulty {
    fn complete(&self, req: &ProviderRequest, meta: &CallMeta) -> Result<ProviderResponse, ProviderError> {
        match self.faults.get(&(meta.doc_id.clone(), meta.stage)).copied().unwrap_or(Fault::Ok) {
            Fault::Ok => self.inner.complete(req, meta),
            Fault::Transient => Err(ProviderError::Transient("connection reset".into())),
            Fault::Fatal => Err(ProviderError::Fatal("HTTP 400".into())),
            Fault::Garbage => Ok(ProviderResponse {
                text: "I would rather not answer in JSON.".into(),
                prompt_tokens: 10,
                completion_tokens: 10,
                latency_ms: 0,
            }),
        }
    }
}

fn fault() -> impl Strategy<Value = Fault> {
    prop_oneof![3 => Just(Fault::Ok), 1 => Just(Fault::Transient), 1 => Just(Fault::Fatal), 1 => Just(Fault::Garbage)]
}

fn small_corpus(dir: &Path) {
    for d in DOCS {
        std::fs::copy(common::corpus().join(format!("{d}.pdf")), dir.join(format!("{d}.pdf"))).unwrap();
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn faults_stay_isolated(gate in prop::collection::vec(fault(), 8), analyst in prop::collection::vec(fault(), 8)) {
        let manifest: BTreeMap<String, Value> =
            serde_json::from_str(&std::fs::read_to_string(common::fixtures().join("corpus_manifest.json")).unwrap()).unwrap();
        let corpus = tempfile::tempdir().unwrap();
        small_corpus(corpus.path());
        let mut faults = BTreeMap::new();
        for (i, d) in DOCS.iter().enumerate() {
            faults.insert((d.to_string(), Stage::Gatekeeper), gate[i]);
            faults.insert((d.to_string(), Stage::Analyst), analyst[i]);
        }
        let provider = Faulty {
            inner: MockProvider::from_file(&common::fixtures().join("mock_script.json")).unwrap(),
            faults,
        };
        let client = Arc::new(ProviderClient::new(
            Box::new(provider),
            ClientConfig { backoff_base_ms: 1, max_retries: 2, ..ClientConfig::default() },
        ));
        let store = Arc::new(Store::open_in_memory().unwrap());
        let work = tempfile::tempdir().unwrap();
        let report = common::pipeline_in(work.path(), client.clone(), store.clone()).run(corpus.path()).unwrap();

        let mut expected_records = 0;
        for (i, d) in DOCS.iter().enumerate() {
            let entry = report.documents.iter().find(|e| e.doc_id == *d).unwrap();
            prop_assert!(entry.job.history_is_legal(), "{:?}", entry.job);
            let relevant = manifest[*d]["relevant"] == Value::Bool(true);
            let want = if gate[i] != Fault::Ok {
                JobState::Failed
            } else if !relevant {
                JobState::Rejected
            } else if analyst[i] != Fault::Ok {
                JobState::Failed
            } else {
                expected_records += manifest[*d]["records"].as_u64().unwrap();
                JobState::NeedsReview
            };
            prop_assert_eq!(entry.job.state, want, "{}", d);
            prop_assert_eq!(entry.manual_review, gate[i] == Fault::Garbage);
            let stored = store.records_for_doc(d).unwrap().len() as u64;
            if want != JobState::NeedsReview {
                prop_assert_eq!(stored, 0);
            }
            let analyst_calls = client.call_log().iter().filter(|c| c.doc_id == *d && c.stage == Stage::Analyst).count();
            prop_assert_eq!(analyst_calls > 0, gate[i] == Fault::Ok && relevant, "{}", d);
        }
        prop_assert_eq!(store.count().unwrap(), expected_records);
    }
}
