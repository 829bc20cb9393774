//! Stage I: three-criterion relevance screen over a document head.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::json::strip_code_fences;
use super::prompts;
use super::{CallMeta, ModelTier, ProviderClient, ProviderError, ProviderRequest, Stage};
use crate::ingest::HeadSegment;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateVerdict {
    pub domain_relevance: bool,
    pub theoretical_content: bool,
    pub experimental_validation: bool,
    /// Always the conjunction of the three criteria; never read from the model.
    pub relevant: bool,
    pub rationale: String,
    pub score: f64,
}

impl GateVerdict {
    pub fn from_criteria(domain: bool, theory: bool, experiment: bool, rationale: &str, score: Option<f64>) -> Self {
        let hits = [domain, theory, experiment].iter().filter(|b| **b).count();
        Self {
            domain_relevance: domain,
            theoretical_content: theory,
            experimental_validation: experiment,
            relevant: domain && theory && experiment,
            rationale: rationale.to_string(),
            score: score.unwrap_or(hits as f64 / 3.0),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GateError {
    #[error("head segment of {0} is empty")]
    EmptyHead(String),
    #[error("unparseable verdict for {doc_id} after repair: {message}")]
    UnparseableVerdict { doc_id: String, message: String },
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

/// Parses a model reply into a verdict. The `relevant` field, if the model
/// sent one, is ignored.
pub fn parse_verdict(text: &str) -> Result<GateVerdict, String> {
    let body = strip_code_fences(text);
    let value: Value = serde_json::from_str(body).map_err(|e| format!("not valid JSON: {e}"))?;
    let obj = value.as_object().ok_or("verdict must be a JSON object")?;
    let flag = |key: &str| -> Result<bool, String> {
        match obj.get(key) {
            Some(Value::Bool(b)) => Ok(*b),
            Some(_) => Err(format!("`{key}` must be a boolean")),
            None => Err(format!("`{key}` is missing")),
        }
    };
    let domain = flag("domain_relevance")?;
    let theory = flag("theoretical_content")?;
    let experiment = flag("experimental_validation")?;
    let rationale = match obj.get("rationale") {
        Some(Value::String(s)) => s.clone(),
        Some(_) => return Err("`rationale` must be a string".into()),
        None => return Err("`rationale` is missing".into()),
    };
    let score = match obj.get("score") {
        None | Some(Value::Null) => None,
        Some(v) => match v.as_f64() {
            Some(s) if (0.0..=1.0).contains(&s) => Some(s),
            _ => return Err("`score` must be a number in [0, 1]".into()),
        },
    };
    Ok(GateVerdict::from_criteria(domain, theory, experiment, &rationale, score))
}

const MAX_VERDICT_TOKENS: u32 = 400;

fn request(user_content: String) -> ProviderRequest {
    ProviderRequest {
        model_tier: ModelTier::GatekeeperTier,
        system_prompt: prompts::GATEKEEPER.to_string(),
        user_content,
        max_output_tokens: MAX_VERDICT_TOKENS,
        temperature: 0.0,
    }
}

/// Screens one document head. Only the head is ever sent.
///
/// A malformed reply gets one repair attempt; if that also fails the caller
/// must route the document to manual review.
pub fn gatekeeper_screen(client: &ProviderClient, head: &HeadSegment) -> Result<GateVerdict, GateError> {
    if head.text.trim().is_empty() {
        return Err(GateError::EmptyHead(head.doc_id.clone()));
    }
    let user = format!("Paper opening segment (doc_id {}):\n\n{}", head.doc_id, head.text);
    let first = client.complete(&request(user.clone()), &CallMeta::new(Stage::Gatekeeper, &head.doc_id, 1))?;
    let problem = match parse_verdict(&first.text) {
        Ok(v) => return Ok(v),
        Err(problem) => problem,
    };
    tracing::warn!(doc = %head.doc_id, "gatekeeper verdict unparseable ({problem}); sending repair request");

    let repair = format!(
        "{user}\n\nYour previous reply could not be used: {problem}.\nPrevious reply:\n{}\n\nReply again with only the JSON object.",
        first.text
    );
    let second = client.complete(&request(repair), &CallMeta::new(Stage::Gatekeeper, &head.doc_id, 2))?;
    parse_verdict(&second.text).map_err(|message| GateError::UnparseableVerdict {
        doc_id: head.doc_id.clone(),
        message,
    })
}
