//! Stage II: schema-constrained extraction with a bounded repair loop.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::json::strip_code_fences;
use super::prompts;
use super::{CallMeta, ModelTier, ProviderClient, ProviderRequest, Stage};
use crate::ingest::SerializedDoc;
use crate::schema::{
    check_grounding, normalize_equation, record_key_id, validate_record, ConstitutiveModelRecord, ValidationError,
    ValidationReport,
};

pub const DEFAULT_CORRECTION_BUDGET: u32 = 3;

/// Characters of context on each side of a candidate block.
pub const LOCAL_CONTEXT_CHARS: usize = 600;

const MAX_EXTRACTION_TOKENS: u32 = 8000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractionStatus {
    Ok,
    FailedSchema,
    ProviderError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionEntry {
    pub attempt: u32,
    pub errors: Vec<ValidationError>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionResult {
    pub doc_id: String,
    pub records: Vec<ConstitutiveModelRecord>,
    pub attempts: u32,
    pub correction_trace: Vec<CorrectionEntry>,
    pub status: ExtractionStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// The first extraction request: schema and rules in the system prompt;
/// local context around every candidate block, then the full text.
pub fn build_analyst_request(doc: &SerializedDoc) -> ProviderRequest {
    let chars: Vec<char> = doc.full_text.chars().collect();
    let mut user = format!("doc_id: {}\n\n## Local context of candidate regions\n", doc.doc_id);
    for block in &doc.equation_candidates {
        let lo = block.span[0].saturating_sub(LOCAL_CONTEXT_CHARS);
        let hi = (block.span[1] + LOCAL_CONTEXT_CHARS).min(chars.len());
        let context: String = chars[lo..hi].iter().collect();
        user.push_str(&format!(
            "\n[{}] {:?} at chars {}..{}\n{}\n",
            block.block_id, block.kind, block.span[0], block.span[1], context
        ));
    }
    if doc.equation_candidates.is_empty() {
        user.push_str("(none detected)\n");
    }
    user.push_str("\n## Full text\n");
    user.push_str(&doc.full_text);
    ProviderRequest {
        model_tier: ModelTier::AnalystTier,
        system_prompt: prompts::analyst_system_prompt(),
        user_content: user,
        max_output_tokens: MAX_EXTRACTION_TOKENS,
        temperature: 0.0,
    }
}

/// Runs extraction for a document that passed the gate.
pub fn analyst_extract(client: &ProviderClient, doc: &SerializedDoc, budget: u32) -> ExtractionResult {
    let budget = budget.max(1);
    let request = build_analyst_request(doc);
    match client.complete(&request, &CallMeta::new(Stage::Analyst, &doc.doc_id, 1)) {
        Ok(resp) => run_loop(client, doc, &request, resp.text, budget),
        Err(e) => ExtractionResult {
            doc_id: doc.doc_id.clone(),
            records: Vec::new(),
            attempts: 1,
            correction_trace: Vec::new(),
            status: ExtractionStatus::ProviderError,
            error: Some(e.to_string()),
        },
    }
}

/// Validates `first_output` and repairs it until it passes or the budget
/// (total attempts, including the first) runs out.
pub fn self_correct_loop(
    client: &ProviderClient,
    doc: &SerializedDoc,
    first_output: &str,
    budget: u32,
) -> ExtractionResult {
    let request = build_analyst_request(doc);
    run_loop(client, doc, &request, first_output.to_string(), budget.max(1))
}

fn run_loop(
    client: &ProviderClient,
    doc: &SerializedDoc,
    request: &ProviderRequest,
    mut output: String,
    budget: u32,
) -> ExtractionResult {
    let mut trace = Vec::new();
    let mut attempt = 1;
    loop {
        let errors = match check_output(&doc.doc_id, &output) {
            Ok(records) => {
                return ExtractionResult {
                    doc_id: doc.doc_id.clone(),
                    records,
                    attempts: attempt,
                    correction_trace: trace,
                    status: ExtractionStatus::Ok,
                    error: None,
                }
            }
            Err(errors) => errors,
        };
        tracing::info!(doc = %doc.doc_id, attempt, violations = errors.len(), "extraction rejected by validator");
        trace.push(CorrectionEntry { attempt, errors });
        if attempt >= budget {
            return ExtractionResult {
                doc_id: doc.doc_id.clone(),
                records: Vec::new(),
                attempts: attempt,
                correction_trace: trace,
                status: ExtractionStatus::FailedSchema,
                error: Some(format!("output still invalid after {attempt} attempts")),
            };
        }

        let constraints: Vec<String> = trace
            .last()
            .map(|t| t.errors.iter().map(|e| format!("{}: {}", e.json_path, e.message)).collect())
            .unwrap_or_default();
        let repair = ProviderRequest {
            user_content: format!(
                "{}\n\n## Correction\n{}",
                request.user_content,
                prompts::repair_instructions(&constraints, &output)
            ),
            ..request.clone()
        };
        attempt += 1;
        match client.complete(&repair, &CallMeta::new(Stage::Analyst, &doc.doc_id, attempt)) {
            Ok(resp) => output = resp.text,
            Err(e) => {
                return ExtractionResult {
                    doc_id: doc.doc_id.clone(),
                    records: Vec::new(),
                    attempts: attempt,
                    correction_trace: trace,
                    status: ExtractionStatus::ProviderError,
                    error: Some(e.to_string()),
                }
            }
        }
    }
}

fn root_error(message: String) -> Vec<ValidationError> {
    ValidationReport::syntax_error(message).errors
}

/// Parses and checks one model output. Bookkeeping fields (doc id, record
/// id, review status) are stamped locally rather than trusted.
fn check_output(doc_id: &str, output: &str) -> Result<Vec<ConstitutiveModelRecord>, Vec<ValidationError>> {
    let body = strip_code_fences(output);
    let value: Value = serde_json::from_str(body).map_err(|e| root_error(format!("output is not valid JSON: {e}")))?;
    let Some(items) = value.get("records").and_then(Value::as_array) else {
        return Err(vec![ValidationError {
            json_path: "$.records".into(),
            message: "expected an object with a `records` array".into(),
        }]);
    };

    let mut errors = Vec::new();
    let mut records = Vec::new();
    for (i, item) in items.iter().enumerate() {
        let prefix = format!("$.records[{i}]");
        let mut item = item.clone();
        if let Value::Object(obj) = &mut item {
            obj.insert("doc_id".into(), Value::String(doc_id.to_string()));
            obj.insert("review_status".into(), Value::String("unverified".into()));
            if !obj.get("record_id").and_then(Value::as_str).is_some_and(|s| !s.is_empty()) {
                obj.insert("record_id".into(), Value::String(String::new()));
            }
        }
        let report = validate_record(&item);
        if !report.valid {
            errors.extend(report.prefixed(&prefix).errors);
            continue;
        }
        let mut record: ConstitutiveModelRecord = match serde_json::from_value(item) {
            Ok(r) => r,
            Err(e) => {
                errors.push(ValidationError {
                    json_path: prefix,
                    message: e.to_string(),
                });
                continue;
            }
        };
        match check_grounding(&record.equation_latex, &record.symbol_map) {
            Ok(g) if g.grounded => {}
            Ok(g) => {
                for v in g.violations() {
                    errors.push(ValidationError {
                        json_path: format!("{prefix}.symbol_map"),
                        message: v,
                    });
                }
                continue;
            }
            Err(e) => {
                errors.push(ValidationError {
                    json_path: format!("{prefix}.equation_latex"),
                    message: e.to_string(),
                });
                continue;
            }
        }
        if record.record_id.is_empty() {
            let canon = normalize_equation(&record.equation_latex).expect("validated equation tokenizes");
            record.record_id = record_key_id(doc_id, &canon, &record.material.material_name);
        }
        records.push(record);
    }
    if errors.is_empty() {
        Ok(records)
    } else {
        Err(errors)
    }
}
