//! HTTP front end: upload papers, poll extraction jobs, search and review
//! records, read the mechanism histogram.
//!
//! Reads are open; `POST` endpoints require `Authorization: Bearer <token>`
//! when a token is configured. Errors are JSON `{code, message, detail}`.
//! See `docs/api.md` for the endpoint reference.

mod error;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use axum::extract::multipart::MultipartRejection;
use axum::extract::rejection::JsonRejection;
use axum::extract::{DefaultBodyLimit, Multipart, Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::routing::{get, post};
use axum::{Json, Router};
use cmdb_core::ingest::{sha256_hex, RawDocument};
use cmdb_core::pipeline::{ExtractionJob, JobState, Pipeline};
use cmdb_core::schema::{check_grounding, GroundingReport};
use cmdb_core::store::{MechanismHistogram, Page, QueryFilter, ReviewAction, StoredRecord, DEFAULT_PAGE_SIZE};
use cmdb_core::{GateVerdict, ReviewStatus};
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use error::{ApiError, ErrorBody, ERROR_CODES};

pub const DEFAULT_LISTEN_ADDR: &str = "127.0.0.1:8080";
pub const DEFAULT_MAX_UPLOAD_BYTES: usize = 50 * 1024 * 1024;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServerConfig {
    pub listen_addr: SocketAddr,
    /// Required on mutating endpoints when set.
    pub api_token: Option<String>,
    pub max_upload_bytes: usize,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            listen_addr: DEFAULT_LISTEN_ADDR.parse().expect("valid default address"),
            api_token: None,
            max_upload_bytes: DEFAULT_MAX_UPLOAD_BYTES,
        }
    }
}

impl ServerConfig {
    /// `CM_LISTEN_ADDR`, `CM_API_TOKEN`, `CM_MAX_UPLOAD_BYTES` over defaults.
    pub fn from_env() -> Result<Self, String> {
        let mut c = Self::default();
        if let Ok(addr) = std::env::var("CM_LISTEN_ADDR") {
            c.listen_addr = addr.parse().map_err(|e| format!("CM_LISTEN_ADDR `{addr}`: {e}"))?;
        }
        c.api_token = std::env::var("CM_API_TOKEN").ok().filter(|t| !t.is_empty());
        if let Ok(n) = std::env::var("CM_MAX_UPLOAD_BYTES") {
            c.max_upload_bytes = n.parse().map_err(|e| format!("CM_MAX_UPLOAD_BYTES `{n}`: {e}"))?;
        }
        Ok(c)
    }
}

/// Jobs started through this server, keyed by doc id, plus the content-hash
/// index used to deduplicate uploads. Jobs from earlier CLI runs are read
/// from the pipeline manifest instead.
#[derive(Default)]
struct Registry {
    jobs: HashMap<String, ExtractionJob>,
    by_sha: HashMap<String, String>,
}

pub struct AppState {
    pipeline: Arc<Pipeline>,
    registry: Mutex<Registry>,
    api_token: Option<String>,
    max_upload_bytes: usize,
}

impl AppState {
    pub fn new(pipeline: Arc<Pipeline>, config: &ServerConfig) -> Arc<Self> {
        Arc::new(Self {
            pipeline,
            registry: Mutex::new(Registry::default()),
            api_token: config.api_token.clone(),
            max_upload_bytes: config.max_upload_bytes,
        })
    }

    fn job(&self, doc_id: &str) -> Option<ExtractionJob> {
        let live = self.registry.lock().unwrap().jobs.get(doc_id).cloned();
        live.or_else(|| self.pipeline.entry(doc_id).map(|e| e.job))
    }

    fn authorize(&self, headers: &HeaderMap) -> Result<(), ApiError> {
        let Some(token) = &self.api_token else {
            return Ok(());
        };
        let given = headers
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "));
        if given == Some(token.as_str()) {
            Ok(())
        } else {
            Err(ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "missing or wrong bearer token"))
        }
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    // leave room for multipart framing; the file itself is checked exactly
    let body_limit = state.max_upload_bytes.saturating_add(64 * 1024);
    Router::new()
        .route("/documents", post(upload).layer(DefaultBodyLimit::max(body_limit)))
        .route("/documents/{id}", get(document))
        .route("/models", get(models))
        .route("/extractions/{record_id}/review", post(review))
        .route("/stats/mechanisms", get(mechanisms))
        .route("/health", get(health))
        .with_state(state)
}

/// Binds and serves until Ctrl-C.
pub async fn serve(state: Arc<AppState>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ApiError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker panicked: {e}")))?
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UploadResponse {
    pub doc_id: String,
    pub job_state: JobState,
}

/// `<file stem>-<8 hex of sha256>`, lowercased, with anything outside
/// `[a-z0-9-]` turned into `-`.
fn upload_doc_id(file_name: Option<&str>, sha: &str) -> String {
    let stem = file_name
        .map(|n| std::path::Path::new(n).file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default())
        .unwrap_or_default();
    let mut slug = String::new();
    for c in stem.to_lowercase().chars() {
        let c = if c.is_ascii_alphanumeric() { c } else { '-' };
        if !(c == '-' && (slug.is_empty() || slug.ends_with('-'))) {
            slug.push(c);
        }
    }
    let slug = slug.trim_end_matches('-');
    let slug = if slug.is_empty() { "doc" } else { slug };
    format!("{slug}-{}", &sha[..8])
}

async fn upload(
    State(st): State<Arc<AppState>>,
    headers: HeaderMap,
    multipart: Result<Multipart, MultipartRejection>,
) -> Result<(StatusCode, Json<UploadResponse>), ApiError> {
    st.authorize(&headers)?;
    let mut multipart = multipart.map_err(|e| ApiError::bad_request(e.body_text()))?;
    let too_large = || {
        ApiError::new(
            StatusCode::PAYLOAD_TOO_LARGE,
            "too_large",
            format!("upload exceeds {} bytes", st.max_upload_bytes),
        )
    };
    let multipart_err = |e: axum::extract::multipart::MultipartError| {
        if e.status() == StatusCode::PAYLOAD_TOO_LARGE {
            too_large()
        } else {
            ApiError::bad_request(e.body_text())
        }
    };

    let mut file: Option<(Option<String>, Vec<u8>)> = None;
    while let Some(mut field) = multipart.next_field().await.map_err(multipart_err)? {
        if field.name() != Some("file") && field.file_name().is_none() {
            continue;
        }
        let name = field.file_name().map(str::to_string);
        let mut bytes = Vec::new();
        while let Some(chunk) = field.chunk().await.map_err(multipart_err)? {
            if bytes.len() + chunk.len() > st.max_upload_bytes {
                return Err(too_large());
            }
            bytes.extend_from_slice(&chunk);
        }
        file = Some((name, bytes));
        break;
    }
    let (name, bytes) = file.ok_or_else(|| ApiError::bad_request("multipart body has no `file` field"))?;
    if !bytes.starts_with(b"%PDF-") {
        return Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "not_a_pdf",
            "upload is not a PDF (missing %PDF- header)",
        ));
    }

    let sha = sha256_hex(&bytes);
    let doc_id = {
        let mut reg = st.registry.lock().unwrap();
        if let Some(existing) = reg.by_sha.get(&sha).cloned() {
            let state = reg.jobs.get(&existing).map_or(JobState::Queued, |j| j.state);
            return Ok((
                StatusCode::OK,
                Json(UploadResponse {
                    doc_id: existing,
                    job_state: state,
                }),
            ));
        }
        let doc_id = upload_doc_id(name.as_deref(), &sha);
        reg.by_sha.insert(sha, doc_id.clone());
        reg.jobs.insert(doc_id.clone(), ExtractionJob::new(&doc_id));
        doc_id
    };

    let raw = RawDocument::new(doc_id.clone(), name.unwrap_or_else(|| format!("{doc_id}.pdf")), bytes);
    let worker = st.clone();
    tokio::task::spawn_blocking(move || {
        let observe = |job: &ExtractionJob| {
            worker.registry.lock().unwrap().jobs.insert(job.doc_id.clone(), job.clone());
        };
        if let Err(e) = worker.pipeline.process_document(&raw, &observe) {
            tracing::error!(doc = %raw.doc_id, "{e}");
            let mut reg = worker.registry.lock().unwrap();
            if let Some(job) = reg.jobs.get_mut(&raw.doc_id) {
                if job.fail(e.to_string()).is_err() {
                    job.error = Some(e.to_string());
                }
            }
        }
    });
    Ok((
        StatusCode::ACCEPTED,
        Json(UploadResponse {
            doc_id,
            job_state: JobState::Queued,
        }),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordView {
    #[serde(flatten)]
    pub stored: StoredRecord,
    /// Absent when the equation no longer tokenizes.
    pub grounding: Option<GroundingReport>,
}

impl RecordView {
    fn of(stored: StoredRecord) -> Self {
        let grounding = check_grounding(&stored.record.equation_latex, &stored.record.symbol_map).ok();
        Self { stored, grounding }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentView {
    #[serde(flatten)]
    pub job: ExtractionJob,
    pub verdict: Option<GateVerdict>,
    /// Filled once extraction has finished; empty before.
    pub records: Vec<RecordView>,
}

async fn document(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<DocumentView>, ApiError> {
    let job = st.job(&id).ok_or_else(|| ApiError::not_found(format!("document {id} not found")))?;
    let verdict = st.pipeline.entry(&id).and_then(|e| e.verdict);
    let done = matches!(job.state, JobState::NeedsReview | JobState::Verified | JobState::Rejected);
    let records = if done {
        let store = st.pipeline.store().clone();
        let doc = id.clone();
        blocking(move || Ok(store.records_for_doc(&doc)?)).await?
    } else {
        Vec::new()
    };
    Ok(Json(DocumentView {
        job,
        verdict,
        records: records.into_iter().map(RecordView::of).collect(),
    }))
}

fn parse_param<T: FromStr>(params: &HashMap<String, String>, key: &str) -> Result<Option<T>, ApiError>
where
    T::Err: std::fmt::Display,
{
    params
        .get(key)
        .filter(|v| !v.is_empty())
        .map(|v| {
            v.parse::<T>()
                .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "bad_filter", format!("{key}: {e}")))
        })
        .transpose()
}

const MODEL_PARAMS: [&str; 10] = [
    "material_class",
    "mechanism",
    "param",
    "min",
    "max",
    "q",
    "material",
    "review_status",
    "page",
    "page_size",
];

/// Maps `GET /models` query parameters onto a [`QueryFilter`].
pub fn filter_from_query(params: &HashMap<String, String>) -> Result<QueryFilter, ApiError> {
    if let Some(unknown) = params.keys().find(|k| !MODEL_PARAMS.contains(&k.as_str())) {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "bad_filter", format!("unknown query parameter `{unknown}`"))
            .with_detail(serde_json::json!({ "allowed": MODEL_PARAMS })));
    }
    let text = |k: &str| params.get(k).filter(|v| !v.trim().is_empty()).cloned();
    let f = QueryFilter {
        material_class: parse_param(params, "material_class")?,
        mechanism: parse_param(params, "mechanism")?,
        review_status: parse_param::<ReviewStatus>(params, "review_status")?,
        parameter_symbol: text("param"),
        param_min_si: parse_param(params, "min")?,
        param_max_si: parse_param(params, "max")?,
        material_name_substring: text("material"),
        text: text("q"),
        page: parse_param(params, "page")?.unwrap_or(1),
        page_size: parse_param(params, "page_size")?.unwrap_or(DEFAULT_PAGE_SIZE),
    };
    f.validate()
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "bad_filter", e.to_string()))?;
    Ok(f)
}

async fn models(
    State(st): State<Arc<AppState>>,
    Query(params): Query<HashMap<String, String>>,
) -> Result<Json<Page<StoredRecord>>, ApiError> {
    let filter = filter_from_query(&params)?;
    let store = st.pipeline.store().clone();
    Ok(Json(blocking(move || Ok(store.query_models(&filter)?)).await?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewRequest {
    pub action: String,
    #[serde(default)]
    pub payload: Option<Value>,
    #[serde(default)]
    pub note: Option<String>,
    /// Version the reviewer saw; a newer stored version gives 409.
    #[serde(default)]
    pub expected_version: Option<i64>,
}

async fn review(
    State(st): State<Arc<AppState>>,
    headers: HeaderMap,
    Path(record_id): Path<String>,
    body: Result<Json<ReviewRequest>, JsonRejection>,
) -> Result<Json<StoredRecord>, ApiError> {
    st.authorize(&headers)?;
    let Json(req) = body.map_err(|e| ApiError::bad_request(e.body_text()))?;
    let action = match (req.action.as_str(), req.payload) {
        ("verify", _) => ReviewAction::Verify,
        ("reject", _) => ReviewAction::Reject,
        ("edit", Some(payload)) => ReviewAction::Edit { payload },
        ("edit", None) => return Err(ApiError::bad_request("edit requires a payload")),
        (other, _) => return Err(ApiError::bad_request(format!("unknown action `{other}` (verify, reject, edit)"))),
    };
    let store = st.pipeline.store().clone();
    let note = req.note.unwrap_or_default();
    let expected = req.expected_version;
    let updated = blocking(move || {
        let updated = store.set_review_status(&record_id, &action, &note, expected)?;
        let siblings = store.records_for_doc(&updated.record.doc_id)?;
        Ok((updated, siblings))
    })
    .await?;
    let (updated, siblings) = updated;
    settle_job(&st, &updated.record.doc_id, &siblings);
    Ok(Json(updated))
}

/// Closes a job under review once every record of its document has been
/// decided: verified if any record was accepted, rejected if all were.
fn settle_job(st: &AppState, doc_id: &str, records: &[StoredRecord]) {
    let statuses: Vec<ReviewStatus> = records.iter().map(|r| r.record.review_status).collect();
    if statuses.is_empty() || statuses.contains(&ReviewStatus::Unverified) {
        return;
    }
    let next = if statuses.iter().all(|s| *s == ReviewStatus::Rejected) {
        JobState::Rejected
    } else {
        JobState::Verified
    };
    let mut reg = st.registry.lock().unwrap();
    if !reg.jobs.contains_key(doc_id) {
        if let Some(entry) = st.pipeline.entry(doc_id) {
            reg.jobs.insert(doc_id.to_string(), entry.job);
        }
    }
    if let Some(job) = reg.jobs.get_mut(doc_id) {
        if job.state == JobState::NeedsReview {
            let _ = job.advance(next);
        }
    }
}

async fn mechanisms(State(st): State<Arc<AppState>>) -> Result<Json<MechanismHistogram>, ApiError> {
    let store = st.pipeline.store().clone();
    Ok(Json(blocking(move || Ok(store.mechanism_distribution()?)).await?))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub version: String,
}

async fn health(State(st): State<Arc<AppState>>) -> Result<Json<Health>, ApiError> {
    let store = st.pipeline.store().clone();
    blocking(move || Ok(store.ping()?)).await?;
    Ok(Json(Health {
        status: "ok".into(),
        version: env!("CARGO_PKG_VERSION").into(),
    }))
}
