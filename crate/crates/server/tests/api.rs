use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use axum::Router;
use cmdb_core::agent::{
    CallMeta, ClientConfig, MockProvider, Provider, ProviderClient, ProviderError, ProviderRequest, ProviderResponse,
    ScriptEntry, Stage,
};
use cmdb_core::pipeline::{Pipeline, PipelineConfig};
use cmdb_core::schema::{MaterialClass, MaterialMeta, SymbolBinding, ValidationInfo};
use cmdb_core::store::Store;
use cmdb_core::{ConstitutiveModelRecord, MechanismClass};
use cmdb_server::{router, AppState, ServerConfig, ERROR_CODES};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

const TOKEN: &str = "test-token";

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn sandstone() -> Vec<u8> {
    std::fs::read(fixtures().join("corpus/sandstone-damage.pdf")).unwrap()
}

/// Uploaded ids carry a hash suffix, so the sandstone script entries are
/// served for any document.
fn wildcard_provider() -> MockProvider {
    let text = std::fs::read_to_string(fixtures().join("mock_script.json")).unwrap();
    let entries: Vec<ScriptEntry> = serde_json::from_str(&text).unwrap();
    let entries = entries
        .into_iter()
        .filter(|e| e.doc_id == "sandstone-damage")
        .map(|e| ScriptEntry { doc_id: "*".into(), ..e })
        .collect();
    MockProvider::new(entries)
}

fn client_of(provider: impl Provider + 'static) -> Arc<ProviderClient> {
    let config = ClientConfig {
        backoff_base_ms: 1,
        ..ClientConfig::default()
    };
    Arc::new(ProviderClient::new(Box::new(provider), config))
}

fn wildcard_client() -> Arc<ProviderClient> {
    client_of(wildcard_provider())
}

struct App {
    router: Router,
    store: Arc<Store>,
    _dir: tempfile::TempDir,
}

fn app_with(max_upload_bytes: usize) -> App {
    app_from(wildcard_client(), max_upload_bytes)
}

fn app_from(client: Arc<ProviderClient>, max_upload_bytes: usize) -> App {
    let dir = tempfile::tempdir().unwrap();
    let store = Arc::new(Store::open(&dir.path().join("models.db")).unwrap());
    let config = PipelineConfig {
        workdir: dir.path().join("work"),
        ..PipelineConfig::default()
    };
    let pipeline = Arc::new(Pipeline::new(config, client, store.clone()).unwrap());
    let server = ServerConfig {
        api_token: Some(TOKEN.into()),
        max_upload_bytes,
        ..ServerConfig::default()
    };
    App {
        router: router(AppState::new(pipeline, &server)),
        store,
        _dir: dir,
    }
}

fn app() -> App {
    app_with(cmdb_server::DEFAULT_MAX_UPLOAD_BYTES)
}

fn multipart(file_name: &str, bytes: &[u8]) -> (String, Vec<u8>) {
    let boundary = "cmdb-test-boundary";
    let mut body = format!(
        "--{boundary}\r\nContent-Disposition: form-data; name=\"file\"; filename=\"{file_name}\"\r\nContent-Type: application/pdf\r\n\r\n"
    )
    .into_bytes();
    body.extend_from_slice(bytes);
    body.extend_from_slice(format!("\r\n--{boundary}--\r\n").as_bytes());
    (format!("multipart/form-data; boundary={boundary}"), body)
}

impl App {
    async fn send(&self, req: Request<Body>) -> (StatusCode, Value) {
        let resp = self.router.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        let value = if bytes.is_empty() {
            Value::Null
        } else {
            serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()))
        };
        (status, value)
    }

    async fn get(&self, uri: &str) -> (StatusCode, Value) {
        self.send(Request::get(uri).body(Body::empty()).unwrap()).await
    }

    async fn upload(&self, file_name: &str, bytes: &[u8]) -> (StatusCode, Value) {
        let (ctype, body) = multipart(file_name, bytes);
        let req = Request::post("/documents")
            .header(header::CONTENT_TYPE, ctype)
            .header(header::AUTHORIZATION, format!("Bearer {TOKEN}"))
            .body(Body::from(body))
            .unwrap();
        self.send(req).await
    }

    fn review_request(record_id: &str, body: Value) -> Request<Body> {
        Request::post(format!("/extractions/{record_id}/review"))
            .header(header::CONTENT_TYPE, "application/json")
            .header(header::AUTHORIZATION, format!("Bearer {TOKEN}"))
            .body(Body::from(body.to_string()))
            .unwrap()
    }

    async fn review(&self, record_id: &str, body: Value) -> (StatusCode, Value) {
        self.send(Self::review_request(record_id, body)).await
    }

    /// Polls until the job leaves the in-flight states.
    async fn settled(&self, doc_id: &str) -> Value {
        for _ in 0..400 {
            let (status, doc) = self.get(&format!("/documents/{doc_id}")).await;
            assert_eq!(status, StatusCode::OK, "{doc}");
            if matches!(doc["state"].as_str(), Some("needs_review" | "rejected" | "failed" | "verified")) {
                return doc;
            }
            tokio::time::sleep(Duration::from_millis(25)).await;
        }
        panic!("job {doc_id} did not settle");
    }

    async fn uploaded_and_settled(&self) -> (String, Value) {
        let (status, body) = self.upload("Sandstone Damage.pdf", &sandstone()).await;
        assert_eq!(status, StatusCode::ACCEPTED, "{body}");
        let doc_id = body["doc_id"].as_str().unwrap().to_string();
        let doc = self.settled(&doc_id).await;
        (doc_id, doc)
    }
}

fn assert_error(body: &Value, code: &str) {
    assert_eq!(body["code"], code, "{body}");
    assert!(ERROR_CODES.contains(&code));
    assert!(body["message"].as_str().is_some_and(|m| !m.is_empty()), "{body}");
    assert!(body.get("detail").is_some(), "{body}");
}

#[tokio::test(flavor = "multi_thread")]
async fn upload_is_queued_then_deduplicated() {
    let app = app();
    let bytes = sandstone();
    let (status, first) = app.upload("Sandstone Damage.pdf", &bytes).await;
    assert_eq!(status, StatusCode::ACCEPTED);
    assert_eq!(first["job_state"], "queued");
    let doc_id = first["doc_id"].as_str().unwrap();
    assert!(doc_id.starts_with("sandstone-damage-"), "{doc_id}");

    let (status, again) = app.upload("renamed.pdf", &bytes).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(again["doc_id"], doc_id);
    app.settled(doc_id).await;
}

#[tokio::test]
async fn upload_rejects_non_pdf_and_oversized() {
    let app = app();
    let text = std::fs::read(fixtures().join("edge/not_a_pdf.txt")).unwrap();
    let (status, body) = app.upload("notes.txt", &text).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_error(&body, "not_a_pdf");

    let small = app_with(4096);
    let hello = std::fs::read(fixtures().join("edge/hello.pdf")).unwrap();
    assert!(hello.len() > 4096);
    let (status, body) = small.upload("hello.pdf", &hello).await;
    assert_eq!(status, StatusCode::PAYLOAD_TOO_LARGE);
    assert_error(&body, "too_large");

    // far past the body limit too, not only the per-file check
    let huge = [b"%PDF-1.4\n".as_slice(), &vec![b' '; 200_000]].concat();
    let (status, body) = small.upload("huge.pdf", &huge).await;
    assert_eq!(status, StatusCode::PAYLOAD_TOO_LARGE, "{body}");
}

#[tokio::test]
async fn upload_without_file_field_is_bad_request() {
    let app = app();
    let boundary = "b";
    let body = format!("--{boundary}\r\nContent-Disposition: form-data; name=\"other\"\r\n\r\nx\r\n--{boundary}--\r\n");
    let req = Request::post("/documents")
        .header(header::CONTENT_TYPE, format!("multipart/form-data; boundary={boundary}"))
        .header(header::AUTHORIZATION, format!("Bearer {TOKEN}"))
        .body(Body::from(body))
        .unwrap();
    let (status, body) = app.send(req).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_error(&body, "bad_request");
}

#[tokio::test]
async fn mutations_need_the_token() {
    let app = app();
    let (ctype, body) = multipart("a.pdf", &sandstone());
    let req = Request::post("/documents")
        .header(header::CONTENT_TYPE, ctype.clone())
        .body(Body::from(body.clone()))
        .unwrap();
    let (status, err) = app.send(req).await;
    assert_eq!(status, StatusCode::UNAUTHORIZED);
    assert_error(&err, "unauthorized");

    let req = Request::post("/documents")
        .header(header::CONTENT_TYPE, ctype)
        .header(header::AUTHORIZATION, "Bearer wrong")
        .body(Body::from(body))
        .unwrap();
    assert_eq!(app.send(req).await.0, StatusCode::UNAUTHORIZED);

    let req = Request::post("/extractions/x/review")
        .header(header::CONTENT_TYPE, "application/json")
        .body(Body::from(r#"{"action":"verify"}"#))
        .unwrap();
    assert_eq!(app.send(req).await.0, StatusCode::UNAUTHORIZED);

    // reads stay open
    assert_eq!(app.get("/models").await.0, StatusCode::OK);
}

#[tokio::test]
async fn unknown_document_is_404() {
    let app = app();
    let (status, body) = app.get("/documents/nope").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_error(&body, "not_found");
}

#[tokio::test(flavor = "multi_thread")]
async fn finished_job_shows_records_with_grounding() {
    let app = app();
    let (doc_id, doc) = app.uploaded_and_settled().await;
    assert_eq!(doc["state"], "needs_review", "{doc}");
    assert_eq!(doc["verdict"]["relevant"], true);
    let states: Vec<&str> = doc["history"].as_array().unwrap().iter().map(|t| t["state"].as_str().unwrap()).collect();
    assert_eq!(states.last(), Some(&"needs_review"), "{states:?}");
    assert!(doc["history"][0]["at"].is_string());

    let records = doc["records"].as_array().unwrap();
    assert_eq!(records.len(), 2);
    for r in records {
        assert_eq!(r["doc_id"], doc_id.as_str());
        assert!(r["equation_latex"].as_str().unwrap().contains("\\epsilon"));
        assert_eq!(r["review_status"], "unverified");
        assert_eq!(r["version"], 1);
        assert_eq!(r["grounding"]["grounded"], true, "{r}");
        assert!(r["grounding"]["ungrounded_symbols"].as_array().unwrap().is_empty());
    }
}

#[tokio::test(flavor = "multi_thread")]
async fn uploaded_records_are_searchable_without_restart() {
    let app = app();
    let (_, empty) = app.get("/models").await;
    assert_eq!(empty["total"], 0);

    let (doc_id, _) = app.uploaded_and_settled().await;
    let (status, page) = app.get("/models?material_class=stone&q=sandstone").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(page["total"], 2, "{page}");
    assert!(page["items"].as_array().unwrap().iter().all(|r| r["doc_id"] == doc_id.as_str()));
    assert!(page["items"][0]["review_status"].is_string());

    let (_, page) = app.get("/models?material_class=timber").await;
    assert_eq!(page["total"], 0);
    let (_, page) = app.get("/models?review_status=unverified&page_size=1&page=2").await;
    assert_eq!(page["total"], 2);
    assert_eq!(page["items"].as_array().unwrap().len(), 1);
    assert_eq!(page["page"], 2);

    let (_, stats) = app.get("/stats/mechanisms").await;
    assert_eq!(stats["total"], 2);
    let pct: f64 = stats["buckets"].as_array().unwrap().iter().map(|b| b["percentage"].as_f64().unwrap()).sum();
    assert!((pct - 100.0).abs() < 0.2, "{stats}");
}

#[tokio::test(flavor = "multi_thread")]
async fn parameter_range_filter() {
    let app = app();
    let (_, doc) = app.uploaded_and_settled().await;
    let rec = &doc["records"][0];
    let p = &rec["parameters"][0];
    let sym = p["symbol"].as_str().unwrap();
    let v = p["value_si"].as_f64().unwrap();
    let (status, page) = app.get(&format!("/models?param={sym}&min={}&max={}", v * 0.9, v * 1.1)).await;
    assert_eq!(status, StatusCode::OK, "{page}");
    assert!(page["items"].as_array().unwrap().iter().any(|r| r["record_id"] == rec["record_id"]), "{page}");
    let (_, page) = app.get(&format!("/models?param={sym}&min={}", v * 10.0 + 1.0)).await;
    assert!(page["items"].as_array().unwrap().iter().all(|r| r["record_id"] != rec["record_id"]));
}

#[tokio::test]
async fn bad_filters_are_400() {
    let app = app();
    for q in [
        "min=3",
        "param=E&min=abc",
        "mechanism=magic",
        "material_class=steel_alloy",
        "page=0",
        "review_status=maybe",
        "colour=red",
        "param=E&min=5&max=1",
    ] {
        let (status, body) = app.get(&format!("/models?{q}")).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{q}: {body}");
        assert_error(&body, "bad_filter");
    }
}

#[tokio::test(flavor = "multi_thread")]
async fn review_actions_and_job_settlement() {
    let app = app();
    let (doc_id, doc) = app.uploaded_and_settled().await;
    let records = doc["records"].as_array().unwrap();
    let a = records[0]["record_id"].as_str().unwrap();
    let b = records[1]["record_id"].as_str().unwrap();

    let (status, body) = app.review("missing", json!({"action": "verify", "note": ""})).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_error(&body, "not_found");

    let (status, body) = app.review(a, json!({"action": "approve"})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_error(&body, "bad_request");
    let (status, _) = app.review(a, json!({"action": "edit"})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let mut broken = records[0].clone();
    broken["confidence"] = json!(1.7);
    let (status, body) = app.review(a, json!({"action": "edit", "payload": broken, "note": "typo"})).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_error(&body, "invalid_edit");
    assert_eq!(body["detail"]["valid"], false);

    let mut edited = records[0].clone();
    edited["confidence"] = json!(0.5);
    edited["doc_id"] = json!("elsewhere");
    let (status, body) = app
        .review(a, json!({"action": "edit", "payload": edited, "note": "lowered", "expected_version": 1}))
        .await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["review_status"], "edited");
    assert_eq!(body["version"], 2);
    assert_eq!(body["confidence"], 0.5);
    assert_eq!(body["doc_id"], doc_id.as_str());

    // one record still open
    assert_eq!(app.settled(&doc_id).await["state"], "needs_review");
    let (status, body) = app.review(b, json!({"action": "reject", "note": "duplicate"})).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["review_status"], "rejected");
    assert_eq!(app.settled(&doc_id).await["state"], "verified");

    let (_, page) = app.get("/models?review_status=edited").await;
    assert_eq!(page["total"], 1);
}

#[tokio::test(flavor = "multi_thread")]
async fn concurrent_reviews_of_one_version_conflict() {
    let app = app();
    let (_, doc) = app.uploaded_and_settled().await;
    let id = doc["records"][0]["record_id"].as_str().unwrap().to_string();

    let verify = App::review_request(&id, json!({"action": "verify", "note": "a", "expected_version": 1}));
    let reject = App::review_request(&id, json!({"action": "reject", "note": "b", "expected_version": 1}));
    let (x, y) = tokio::join!(app.send(verify), app.send(reject));
    let mut statuses = [x.0, y.0];
    statuses.sort();
    assert_eq!(statuses, [StatusCode::OK, StatusCode::CONFLICT], "{x:?} {y:?}");
    let conflict = if x.0 == StatusCode::CONFLICT { &x.1 } else { &y.1 };
    assert_error(conflict, "version_conflict");
    assert_eq!(conflict["detail"], json!({"expected": 1, "current": 2}));

    // a stale retry keeps failing; a fresh one succeeds
    let (status, _) = app.review(&id, json!({"action": "verify", "expected_version": 1})).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (status, body) = app.review(&id, json!({"action": "verify", "expected_version": 2})).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["version"], 3);
}

#[tokio::test]
async fn malformed_review_body_is_400() {
    let app = app();
    let req = Request::post("/extractions/x/review")
        .header(header::CONTENT_TYPE, "application/json")
        .header(header::AUTHORIZATION, format!("Bearer {TOKEN}"))
        .body(Body::from("{not json"))
        .unwrap();
    let (status, body) = app.send(req).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_error(&body, "bad_request");
}

#[tokio::test]
async fn health_reports_version_then_store_outage() {
    let app = app();
    let (status, body) = app.get("/health").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "ok");
    assert_eq!(body["version"], env!("CARGO_PKG_VERSION"));

    let (_, stats) = app.get("/stats/mechanisms").await;
    assert_eq!(stats["total"], 0);

    app.store.close();
    let (status, body) = app.get("/health").await;
    assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);
    assert_error(&body, "store_unavailable");
    let (status, _) = app.get("/models").await;
    assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);
}

#[tokio::test]
async fn serves_over_tcp() {
    let app = app();
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let router = app.router.clone();
    tokio::spawn(async move { axum::serve(listener, router).await.unwrap() });
    let mut stream = tokio::net::TcpStream::connect(addr).await.unwrap();
    use tokio::io::{AsyncReadExt, AsyncWriteExt};
    stream
        .write_all(b"GET /health HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n")
        .await
        .unwrap();
    let mut out = String::new();
    stream.read_to_string(&mut out).await.unwrap();
    assert!(out.starts_with("HTTP/1.1 200"), "{out}");
    assert!(out.contains("\"status\":\"ok\""));
}

/// Holds analyst calls until released.
struct HeldAnalyst {
    inner: MockProvider,
    released: Latch,
}

impl Provider for HeldAnalyst {
    fn complete(&self, req: &ProviderRequest, meta: &CallMeta) -> Result<ProviderResponse, ProviderError> {
        if meta.stage == Stage::Analyst {
            let (lock, cv) = &*self.released;
            let mut open = lock.lock().unwrap();
            while !*open {
                open = cv.wait(open).unwrap();
            }
        }
        self.inner.complete(req, meta)
    }
}

type Latch = Arc<(std::sync::Mutex<bool>, std::sync::Condvar)>;

/// Opens the latch when dropped so a failed assertion cannot leave the
/// blocked worker holding up runtime shutdown.
struct Release(Latch);

impl Release {
    fn open(&self) {
        *self.0 .0.lock().unwrap() = true;
        self.0 .1.notify_all();
    }
}

impl Drop for Release {
    fn drop(&mut self) {
        self.open();
    }
}

#[tokio::test(flavor = "multi_thread")]
async fn job_is_visible_mid_extraction() {
    let released: Latch = Arc::new((std::sync::Mutex::new(false), std::sync::Condvar::new()));
    let release = Release(released.clone());
    let provider = HeldAnalyst {
        inner: wildcard_provider(),
        released: released.clone(),
    };
    let app = app_from(client_of(provider), cmdb_server::DEFAULT_MAX_UPLOAD_BYTES);
    let (_, body) = app.upload("sandstone.pdf", &sandstone()).await;
    let doc_id = body["doc_id"].as_str().unwrap().to_string();

    let mut seen = None;
    for _ in 0..400 {
        let (_, doc) = app.get(&format!("/documents/{doc_id}")).await;
        if doc["state"] == "extracting" {
            seen = Some(doc);
            break;
        }
        tokio::time::sleep(Duration::from_millis(10)).await;
    }
    let doc = seen.expect("job never reached extracting");
    assert!(doc["records"].as_array().unwrap().is_empty());

    release.open();
    let doc = app.settled(&doc_id).await;
    assert_eq!(doc["state"], "needs_review");
    assert_eq!(doc["records"].as_array().unwrap().len(), 2);
}

fn seeded_record(i: usize, mechanism: MechanismClass) -> ConstitutiveModelRecord {
    ConstitutiveModelRecord::build(
        &format!("seed-{i:03}"),
        r"\sigma = E \epsilon",
        vec![
            SymbolBinding::new(r"\sigma", "stress", "Pa"),
            SymbolBinding::new("E", "Young's modulus", "Pa"),
            SymbolBinding::new(r"\epsilon", "strain", "dimensionless"),
        ],
        MaterialMeta {
            material_name: format!("Material {i}"),
            material_class: MaterialClass::Stone,
            provenance_note: String::new(),
            test_conditions: String::new(),
        },
        vec![],
        ValidationInfo::new(""),
        mechanism,
        0.7,
    )
    .unwrap()
}

#[tokio::test]
async fn seeded_store_filters_and_histogram() {
    let app = app();
    let mechanisms = [
        MechanismClass::RheologyTimeDependent,
        MechanismClass::FailureDamage,
        MechanismClass::ElastoPlasticity,
        MechanismClass::FailureDamage,
        MechanismClass::RheologyTimeDependent,
        MechanismClass::CoupledEnvironmental,
        MechanismClass::RheologyTimeDependent,
    ];
    let mut rheology = Vec::new();
    for (i, m) in mechanisms.iter().enumerate() {
        let r = seeded_record(i, *m);
        if *m == MechanismClass::RheologyTimeDependent {
            rheology.push(r.record_id.clone());
        }
        app.store.upsert_record(&r).unwrap();
    }

    let (status, page) = app.get("/models?mechanism=rheology_time_dependent").await;
    assert_eq!(status, StatusCode::OK);
    let mut got: Vec<String> =
        page["items"].as_array().unwrap().iter().map(|r| r["record_id"].as_str().unwrap().to_string()).collect();
    got.sort();
    rheology.sort();
    assert_eq!(got, rheology);
    assert_eq!(page["total"], 3);

    let (_, all) = app.get("/models").await;
    assert_eq!(all["total"], mechanisms.len());
    assert_eq!(all["page"], 1);

    let (_, stats) = app.get("/stats/mechanisms").await;
    let expected = serde_json::to_value(app.store.mechanism_distribution().unwrap()).unwrap();
    assert_eq!(stats, expected);
    let rheo = stats["buckets"]
        .as_array()
        .unwrap()
        .iter()
        .find(|b| b["mechanism"] == "rheology_time_dependent")
        .unwrap();
    assert_eq!(rheo["count"], 3);
    assert_eq!(rheo["percentage"], 42.9);
}

fn keys(v: &Value) -> Vec<&str> {
    let mut k: Vec<&str> = v.as_object().expect("object").keys().map(String::as_str).collect();
    k.sort();
    k
}

/// Top-level field sets as listed in docs/api.md.
#[tokio::test(flavor = "multi_thread")]
async fn response_shapes_match_reference() {
    let app = app();
    let (_, up) = app.upload("s.pdf", &sandstone()).await;
    assert_eq!(keys(&up), ["doc_id", "job_state"]);
    let doc = app.settled(up["doc_id"].as_str().unwrap()).await;
    assert_eq!(keys(&doc), ["doc_id", "history", "records", "state", "verdict"]);
    assert_eq!(keys(&doc["history"][0]), ["at", "state"]);
    let record_keys = [
        "confidence",
        "doc_id",
        "equation_latex",
        "material",
        "mechanism",
        "parameters",
        "record_id",
        "review_status",
        "symbol_map",
        "updated_at",
        "validation",
        "version",
    ];
    let with_grounding: Vec<&str> = {
        let mut k = record_keys.to_vec();
        k.push("grounding");
        k.sort();
        k
    };
    assert_eq!(keys(&doc["records"][0]), with_grounding);

    let (_, page) = app.get("/models").await;
    assert_eq!(keys(&page), ["items", "page", "page_size", "total"]);
    assert_eq!(keys(&page["items"][0]), record_keys);

    let id = page["items"][0]["record_id"].as_str().unwrap();
    let (_, reviewed) = app.review(id, json!({"action": "verify", "note": "ok"})).await;
    assert_eq!(keys(&reviewed), record_keys);

    let (_, stats) = app.get("/stats/mechanisms").await;
    assert_eq!(keys(&stats), ["buckets", "total"]);
    assert_eq!(keys(&stats["buckets"][0]), ["count", "mechanism", "percentage"]);

    let (_, health) = app.get("/health").await;
    assert_eq!(keys(&health), ["status", "version"]);

    let (_, err) = app.get("/documents/none").await;
    assert_eq!(keys(&err), ["code", "detail", "message"]);
}
