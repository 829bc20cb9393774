use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::agent::{estimate_tokens, CallRecord, ModelTier};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TierTokens {
    pub calls: u64,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

impl TierTokens {
    pub fn total(&self) -> u64 {
        self.prompt_tokens + self.completion_tokens
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub gatekeeper: TierTokens,
    pub analyst: TierTokens,
    pub docs_screened: u64,
    pub docs_extracted: u64,
    /// Analyst-tier tokens had every screened document gone straight to
    /// extraction, at 4 characters per token.
    pub hypothetical_single_stage_tokens: u64,
    /// `1 - actual / hypothetical`; negative when gate overhead dominates.
    pub savings_ratio: f64,
}

impl CostReport {
    pub fn actual_tokens(&self) -> u64 {
        self.gatekeeper.total() + self.analyst.total()
    }
}

/// Sums the call log per tier. `full_text_chars` maps doc ids to the length
/// of their serialized text; only documents that were screened in this log
/// count toward the single-stage baseline.
pub fn account_cost(call_log: &[CallRecord], full_text_chars: &BTreeMap<String, usize>) -> CostReport {
    let mut gatekeeper = TierTokens::default();
    let mut analyst = TierTokens::default();
    let mut screened = BTreeSet::new();
    let mut extracted = BTreeSet::new();
    for c in call_log {
        let (tier, docs) = match c.tier {
            ModelTier::GatekeeperTier => (&mut gatekeeper, &mut screened),
            ModelTier::AnalystTier => (&mut analyst, &mut extracted),
        };
        tier.calls += 1;
        tier.prompt_tokens += c.prompt_tokens;
        tier.completion_tokens += c.completion_tokens;
        docs.insert(c.doc_id.as_str());
    }
    let hypothetical: u64 = screened
        .iter()
        .map(|d| full_text_chars.get(*d).map_or(0, |n| estimate_tokens(*n)))
        .sum();
    let actual = gatekeeper.total() + analyst.total();
    let savings_ratio = if hypothetical == 0 {
        0.0
    } else {
        1.0 - actual as f64 / hypothetical as f64
    };
    CostReport {
        gatekeeper,
        analyst,
        docs_screened: screened.len() as u64,
        docs_extracted: extracted.len() as u64,
        hypothetical_single_stage_tokens: hypothetical,
        savings_ratio,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::Stage;

    fn call(tier: ModelTier, doc: &str, prompt: u64, completion: u64) -> CallRecord {
        CallRecord {
            tier,
            stage: match tier {
                ModelTier::GatekeeperTier => Stage::Gatekeeper,
                ModelTier::AnalystTier => Stage::Analyst,
            },
            doc_id: doc.into(),
            attempt: 1,
            transport_attempts: 1,
            prompt_tokens: prompt,
            completion_tokens: completion,
            ok: true,
        }
    }

    #[test]
    fn arithmetic() {
        let chars: BTreeMap<String, usize> = [("a".to_string(), 4000), ("b".to_string(), 4001)].into();
        let log = vec![
            call(ModelTier::GatekeeperTier, "a", 100, 10),
            call(ModelTier::GatekeeperTier, "b", 100, 10),
            call(ModelTier::AnalystTier, "b", 800, 80),
        ];
        let r = account_cost(&log, &chars);
        assert_eq!(r.hypothetical_single_stage_tokens, 1000 + 1001);
        assert_eq!(r.actual_tokens(), 1100);
        assert_eq!((r.docs_screened, r.docs_extracted), (2, 1));
        assert_eq!(r.savings_ratio, 1.0 - 1100.0 / 2001.0);
    }

    #[test]
    fn empty_log() {
        let r = account_cost(&[], &BTreeMap::new());
        assert_eq!(r.savings_ratio, 0.0);
        assert_eq!(r.actual_tokens(), 0);
    }
}
