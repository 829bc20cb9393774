//! Corpus orchestration: parse, screen, extract, store.
//!
//! Every document moves through the [`JobState`] lifecycle independently.
//! Progress is kept in a manifest in the work directory so an interrupted or
//! repeated run only redoes what changed.

mod config;
mod cost;
mod jobs;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

pub use config::{
    ConfigError, ConfigLayer, PipelineConfig, DEFAULT_DOC_TIMEOUT_SECS, DEFAULT_WORKERS, ENV_VARS,
};
pub use cost::{account_cost, CostReport, TierTokens};
pub use jobs::{ExtractionJob, IllegalTransition, JobState, Transition};

use crate::agent::prompts::PROMPT_VERSION;
use crate::agent::{analyst_extract, gatekeeper_screen, ExtractionStatus, GateError, GateVerdict, ProviderClient};
use crate::ingest::{parse_pdf, truncate_head, RawDocument, SerializedDoc};
use crate::store::{Store, StoreError};
use crate::SCHEMA_VERSION;

const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("cannot read corpus directory {path}: {source}")]
    UnreadableCorpus {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("no PDF files in {0}")]
    EmptyCorpus(PathBuf),
    #[error("work directory {path}: {source}")]
    Workdir {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("store unavailable: {0}")]
    StoreUnavailable(String),
}

/// How far a stage command drives each document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum StopAfter {
    Parse,
    Screen,
    Extract,
}

/// Persistent per-document progress.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocEntry {
    pub doc_id: String,
    pub source_path: PathBuf,
    pub sha256: String,
    pub prompt_version: String,
    pub schema_version: String,
    pub job: ExtractionJob,
    #[serde(default)]
    pub char_count: usize,
    #[serde(default)]
    pub candidate_count: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub parse_warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<GateVerdict>,
    #[serde(default)]
    pub record_ids: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extraction_attempts: Option<u32>,
    /// Set when the gate reply stayed unusable after repair.
    #[serde(default)]
    pub manual_review: bool,
}

impl DocEntry {
    fn fresh(raw: &RawDocument) -> Self {
        Self {
            doc_id: raw.doc_id.clone(),
            source_path: raw.source_path.clone(),
            sha256: raw.sha256.clone(),
            prompt_version: PROMPT_VERSION.to_string(),
            schema_version: SCHEMA_VERSION.to_string(),
            job: ExtractionJob::new(&raw.doc_id),
            char_count: 0,
            candidate_count: 0,
            parse_warnings: Vec::new(),
            verdict: None,
            record_ids: Vec::new(),
            extraction_attempts: None,
            manual_review: false,
        }
    }

    /// Still valid for `raw` under the current prompt and schema versions.
    fn reusable_for(&self, raw: &RawDocument) -> bool {
        self.sha256 == raw.sha256
            && self.prompt_version == PROMPT_VERSION
            && self.schema_version == SCHEMA_VERSION
            && !matches!(self.job.state, JobState::Failed | JobState::Screening)
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct Manifest {
    entries: BTreeMap<String, DocEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub doc_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub docs_in: usize,
    pub state_counts: BTreeMap<JobState, usize>,
    pub records_stored: usize,
    /// Documents that needed no work in this run.
    pub resumed: usize,
    pub provider_calls: usize,
    pub cost: CostReport,
    pub failures: Vec<Failure>,
    pub manual_queue: Vec<String>,
    pub documents: Vec<DocEntry>,
}

impl PipelineReport {
    pub fn count(&self, state: JobState) -> usize {
        self.state_counts.get(&state).copied().unwrap_or(0)
    }

    pub fn has_failures(&self) -> bool {
        !self.failures.is_empty()
    }

    pub fn summary(&self) -> String {
        let states: Vec<String> = self.state_counts.iter().map(|(s, n)| format!("{s} {n}")).collect();
        let c = &self.cost;
        let mut out = format!(
            "documents: {} (resumed {})\nstates: {}\nrecords stored: {}\nprovider calls: {} (gatekeeper {}, analyst {})\n\
             screened {} / extracted {}\ntokens: actual {} vs single-stage baseline {} (savings {:.1}%)\n",
            self.docs_in,
            self.resumed,
            states.join(", "),
            self.records_stored,
            self.provider_calls,
            c.gatekeeper.calls,
            c.analyst.calls,
            c.docs_screened,
            c.docs_extracted,
            c.actual_tokens(),
            c.hypothetical_single_stage_tokens,
            c.savings_ratio * 100.0,
        );
        for f in &self.failures {
            out.push_str(&format!("failed {}: {}\n", f.doc_id, f.reason));
        }
        if !self.manual_queue.is_empty() {
            out.push_str(&format!("manual review queue: {}\n", self.manual_queue.join(", ")));
        }
        out
    }
}

/// PDF files directly inside `dir`, sorted by name.
pub fn list_corpus(dir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    let unreadable = |source| PipelineError::UnreadableCorpus {
        path: dir.to_path_buf(),
        source,
    };
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(unreadable)? {
        let path = entry.map_err(unreadable)?.path();
        let is_pdf = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("pdf"));
        if is_pdf && path.is_file() {
            files.push(path);
        }
    }
    if files.is_empty() {
        return Err(PipelineError::EmptyCorpus(dir.to_path_buf()));
    }
    files.sort();
    Ok(files)
}

pub struct Pipeline {
    config: PipelineConfig,
    client: Arc<ProviderClient>,
    store: Arc<Store>,
    manifest: Mutex<Manifest>,
}

enum Step {
    Done,
    Fatal(String),
}

impl Pipeline {
    pub fn new(config: PipelineConfig, client: Arc<ProviderClient>, store: Arc<Store>) -> Result<Self, PipelineError> {
        let workdir_err = |source| PipelineError::Workdir {
            path: config.workdir.clone(),
            source,
        };
        std::fs::create_dir_all(&config.workdir).map_err(workdir_err)?;
        let path = config.workdir.join(MANIFEST_FILE);
        let manifest = match std::fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text).unwrap_or_else(|e| {
                tracing::warn!("ignoring unreadable manifest {}: {e}", path.display());
                Manifest::default()
            }),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Manifest::default(),
            Err(e) => return Err(workdir_err(e)),
        };
        Ok(Self {
            config,
            client,
            store,
            manifest: Mutex::new(manifest),
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn client(&self) -> &Arc<ProviderClient> {
        &self.client
    }

    pub fn store(&self) -> &Arc<Store> {
        &self.store
    }

    /// Full run: every document is driven to a terminal or review state.
    pub fn run(&self, corpus_dir: &Path) -> Result<PipelineReport, PipelineError> {
        self.drive(corpus_dir, StopAfter::Extract)
    }

    /// Drives every document in `corpus_dir` up to `stop`. Documents already
    /// past that point are left alone, so `Parse`, `Screen` and `Extract` in
    /// sequence end where a single `run` does.
    pub fn drive(&self, corpus_dir: &Path, stop: StopAfter) -> Result<PipelineReport, PipelineError> {
        let files = list_corpus(corpus_dir)?;
        let log_start = self.client.call_log().len();
        let next = AtomicUsize::new(0);
        let results: Mutex<Vec<(usize, DocEntry, bool)>> = Mutex::new(Vec::new());
        let fatal: Mutex<Option<String>> = Mutex::new(None);

        std::thread::scope(|scope| {
            for _ in 0..self.config.workers.min(files.len()) {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    let Some(path) = files.get(i) else { break };
                    if fatal.lock().unwrap().is_some() {
                        break;
                    }
                    let (entry, worked, step) = self.process_path(path, stop, &|_| {});
                    if let Step::Fatal(msg) = step {
                        fatal.lock().unwrap().get_or_insert(msg);
                    }
                    results.lock().unwrap().push((i, entry, worked));
                });
            }
        });

        if let Some(msg) = fatal.into_inner().unwrap() {
            return Err(PipelineError::StoreUnavailable(msg));
        }
        let mut results = results.into_inner().unwrap();
        results.sort_by_key(|(i, _, _)| *i);
        let log: Vec<_> = self.client.call_log().into_iter().skip(log_start).collect();
        Ok(self.report(results, &log))
    }

    fn process_path(
        &self,
        path: &Path,
        stop: StopAfter,
        observe: &dyn Fn(&ExtractionJob),
    ) -> (DocEntry, bool, Step) {
        match RawDocument::from_path(path) {
            Ok(raw) => self.process(&raw, stop, observe),
            Err(e) => {
                let doc_id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                let mut entry = DocEntry::fresh(&RawDocument::new(doc_id, path, Vec::new()));
                entry.job.fail(e.to_string()).expect("queued can fail");
                observe(&entry.job);
                self.remember(&entry);
                (entry, true, Step::Done)
            }
        }
    }

    /// Processes one in-memory document to `Extract`; used by the service
    /// for uploads. `observe` sees every state change as it happens.
    pub fn process_document(&self, raw: &RawDocument, observe: &dyn Fn(&ExtractionJob)) -> Result<DocEntry, PipelineError> {
        match self.process(raw, StopAfter::Extract, observe) {
            (_, _, Step::Fatal(msg)) => Err(PipelineError::StoreUnavailable(msg)),
            (entry, _, Step::Done) => Ok(entry),
        }
    }

    /// Returns the updated entry and whether any work happened.
    fn process(&self, raw: &RawDocument, stop: StopAfter, observe: &dyn Fn(&ExtractionJob)) -> (DocEntry, bool, Step) {
        let previous = self.manifest.lock().unwrap().entries.get(&raw.doc_id).cloned();
        let mut entry = match previous {
            Some(e) if e.reusable_for(raw) => e,
            _ => DocEntry::fresh(raw),
        };
        let started = Instant::now();
        let deadline = Duration::from_secs(self.config.doc_timeout_secs);
        let mut worked = false;
        let mut doc: Option<SerializedDoc> = None;
        observe(&entry.job);

        loop {
            let state = entry.job.state;
            let wanted = match state {
                JobState::Queued => true,
                JobState::Parsed => stop >= StopAfter::Screen,
                JobState::Extracting => stop >= StopAfter::Extract,
                _ => false,
            };
            if !wanted {
                break;
            }
            if started.elapsed() > deadline {
                self.fail(&mut entry, format!("timed out after {}s", self.config.doc_timeout_secs), observe);
                break;
            }
            worked = true;
            let outcome = match state {
                JobState::Queued => self.step_parse(raw, &mut entry, &mut doc, observe),
                JobState::Parsed => self.step_screen(&mut entry, &mut doc, observe),
                JobState::Extracting => self.step_extract(&mut entry, &mut doc, observe),
                _ => unreachable!("filtered above"),
            };
            self.remember(&entry);
            if let Step::Fatal(msg) = outcome {
                return (entry, worked, Step::Fatal(msg));
            }
        }
        (entry, worked, Step::Done)
    }

    fn fail(&self, entry: &mut DocEntry, reason: String, observe: &dyn Fn(&ExtractionJob)) {
        tracing::warn!(doc = %entry.doc_id, "{reason}");
        entry.job.fail(reason).expect("in-flight job can fail");
        observe(&entry.job);
        self.remember(entry);
    }

    fn move_to(&self, entry: &mut DocEntry, state: JobState, observe: &dyn Fn(&ExtractionJob)) {
        entry.job.advance(state).expect("pipeline follows the job lifecycle");
        observe(&entry.job);
    }

    fn load_doc<'d>(&self, entry: &mut DocEntry, doc: &'d mut Option<SerializedDoc>) -> Option<&'d SerializedDoc> {
        if doc.is_none() {
            let path = self.config.workdir.join(SerializedDoc::file_name(&entry.doc_id));
            match SerializedDoc::load(&path) {
                Ok(d) => *doc = Some(d),
                Err(e) => {
                    tracing::warn!(doc = %entry.doc_id, "cannot reload {}: {e}", path.display());
                    return None;
                }
            }
        }
        doc.as_ref()
    }

    fn step_parse(
        &self,
        raw: &RawDocument,
        entry: &mut DocEntry,
        doc: &mut Option<SerializedDoc>,
        observe: &dyn Fn(&ExtractionJob),
    ) -> Step {
        match parse_pdf(raw) {
            Ok(parsed) => {
                if let Err(e) = parsed.save(&self.config.workdir) {
                    self.fail(entry, format!("cannot write serialized text: {e}"), observe);
                    return Step::Done;
                }
                entry.char_count = parsed.char_count;
                entry.candidate_count = parsed.equation_candidates.len();
                entry.parse_warnings = parsed.parse_warnings.clone();
                *doc = Some(parsed);
                self.move_to(entry, JobState::Parsed, observe);
            }
            Err(e) => self.fail(entry, e.to_string(), observe),
        }
        Step::Done
    }

    fn step_screen(&self, entry: &mut DocEntry, doc: &mut Option<SerializedDoc>, observe: &dyn Fn(&ExtractionJob)) -> Step {
        let Some(d) = self.load_doc(entry, doc) else {
            self.fail(entry, "serialized text missing from work directory".into(), observe);
            return Step::Done;
        };
        let head = truncate_head(d, self.config.limit_chars);
        self.move_to(entry, JobState::Screening, observe);
        match gatekeeper_screen(&self.client, &head) {
            Ok(v) => {
                let next = if v.relevant {
                    JobState::Extracting
                } else {
                    JobState::Rejected
                };
                entry.verdict = Some(v);
                self.move_to(entry, next, observe);
            }
            Err(e) => {
                entry.manual_review = matches!(e, GateError::UnparseableVerdict { .. });
                self.fail(entry, format!("screening: {e}"), observe);
            }
        }
        Step::Done
    }

    fn step_extract(&self, entry: &mut DocEntry, doc: &mut Option<SerializedDoc>, observe: &dyn Fn(&ExtractionJob)) -> Step {
        let Some(d) = self.load_doc(entry, doc) else {
            self.fail(entry, "serialized text missing from work directory".into(), observe);
            return Step::Done;
        };
        let result = analyst_extract(&self.client, d, self.config.correction_budget);
        entry.extraction_attempts = Some(result.attempts);
        if result.status != ExtractionStatus::Ok {
            let reason = match result.status {
                ExtractionStatus::FailedSchema => {
                    let last = result.correction_trace.last().map(|c| c.errors.len()).unwrap_or(0);
                    format!("extraction: schema still invalid after {} attempts ({last} errors)", result.attempts)
                }
                _ => format!("extraction: {}", result.error.unwrap_or_default()),
            };
            self.fail(entry, reason, observe);
            return Step::Done;
        }
        let mut ids = Vec::new();
        for r in &result.records {
            match self.store.upsert_record(r) {
                Ok(out) => ids.push(out.record_id),
                Err(StoreError::Unavailable(msg)) => return Step::Fatal(msg),
                Err(e) => {
                    self.fail(entry, format!("store rejected record {}: {e}", r.record_id), observe);
                    return Step::Done;
                }
            }
        }
        entry.record_ids = ids;
        self.move_to(entry, JobState::NeedsReview, observe);
        Step::Done
    }

    fn remember(&self, entry: &DocEntry) {
        let mut m = self.manifest.lock().unwrap();
        m.entries.insert(entry.doc_id.clone(), entry.clone());
        let path = self.config.workdir.join(MANIFEST_FILE);
        let tmp = path.with_extension("json.tmp");
        let text = serde_json::to_string_pretty(&*m).expect("manifest serializes");
        if let Err(e) = std::fs::write(&tmp, text).and_then(|_| std::fs::rename(&tmp, &path)) {
            tracing::warn!("cannot save manifest {}: {e}", path.display());
        }
    }

    /// Current manifest entry for a document.
    pub fn entry(&self, doc_id: &str) -> Option<DocEntry> {
        self.manifest.lock().unwrap().entries.get(doc_id).cloned()
    }

    fn report(&self, results: Vec<(usize, DocEntry, bool)>, log: &[crate::agent::CallRecord]) -> PipelineReport {
        let mut state_counts = BTreeMap::new();
        let mut failures = Vec::new();
        let mut manual_queue = Vec::new();
        let mut records = BTreeSet::new();
        let mut chars = BTreeMap::new();
        let mut resumed = 0;
        let mut documents = Vec::new();
        for (_, entry, worked) in results {
            *state_counts.entry(entry.job.state).or_insert(0) += 1;
            if entry.job.state == JobState::Failed {
                failures.push(Failure {
                    doc_id: entry.doc_id.clone(),
                    reason: entry.job.error.clone().unwrap_or_default(),
                });
            }
            if entry.manual_review {
                manual_queue.push(entry.doc_id.clone());
            }
            if !worked {
                resumed += 1;
            }
            records.extend(entry.record_ids.iter().cloned());
            chars.insert(entry.doc_id.clone(), entry.char_count);
            documents.push(entry);
        }
        PipelineReport {
            docs_in: documents.len(),
            state_counts,
            records_stored: records.len(),
            resumed,
            provider_calls: log.len(),
            cost: account_cost(log, &chars),
            failures,
            manual_queue,
            documents,
        }
    }
}
