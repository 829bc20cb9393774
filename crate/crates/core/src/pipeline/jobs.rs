use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Queued,
    Parsed,
    Screening,
    Rejected,
    Extracting,
    NeedsReview,
    Verified,
    Failed,
}

impl JobState {
    pub const ALL: [JobState; 8] = [
        JobState::Queued,
        JobState::Parsed,
        JobState::Screening,
        JobState::Rejected,
        JobState::Extracting,
        JobState::NeedsReview,
        JobState::Verified,
        JobState::Failed,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            JobState::Queued => "queued",
            JobState::Parsed => "parsed",
            JobState::Screening => "screening",
            JobState::Rejected => "rejected",
            JobState::Extracting => "extracting",
            JobState::NeedsReview => "needs_review",
            JobState::Verified => "verified",
            JobState::Failed => "failed",
        }
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self, JobState::Rejected | JobState::Verified | JobState::Failed)
    }

    /// Terminal, or parked for a human reviewer.
    pub fn is_settled(&self) -> bool {
        self.is_terminal() || *self == JobState::NeedsReview
    }

    /// The lifecycle graph. Any in-flight state may also fail (parse errors,
    /// unusable gate verdicts, timeouts).
    pub fn can_move_to(&self, to: JobState) -> bool {
        use JobState::*;
        matches!(
            (self, to),
            (Queued, Parsed)
                | (Parsed, Screening)
                | (Screening, Rejected | Extracting)
                | (Extracting, NeedsReview)
                | (NeedsReview, Verified | Rejected)
                | (Queued | Parsed | Screening | Extracting, Failed)
        )
    }
}

impl fmt::Display for JobState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for JobState {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        JobState::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| format!("unknown job state `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub state: JobState,
    pub at: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("illegal job transition {from} -> {to}")]
pub struct IllegalTransition {
    pub from: JobState,
    pub to: JobState,
}

/// Lifecycle of one document. `history` starts with the queued entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionJob {
    pub doc_id: String,
    pub state: JobState,
    pub history: Vec<Transition>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

impl ExtractionJob {
    pub fn new(doc_id: &str) -> Self {
        Self {
            doc_id: doc_id.to_string(),
            state: JobState::Queued,
            history: vec![Transition {
                state: JobState::Queued,
                at: now(),
            }],
            error: None,
        }
    }

    pub fn advance(&mut self, to: JobState) -> Result<(), IllegalTransition> {
        if !self.state.can_move_to(to) {
            return Err(IllegalTransition { from: self.state, to });
        }
        self.state = to;
        self.history.push(Transition { state: to, at: now() });
        Ok(())
    }

    pub fn fail(&mut self, reason: impl Into<String>) -> Result<(), IllegalTransition> {
        self.advance(JobState::Failed)?;
        self.error = Some(reason.into());
        Ok(())
    }

    /// True when every recorded step follows the lifecycle graph.
    pub fn history_is_legal(&self) -> bool {
        self.history.first().map(|t| t.state) == Some(JobState::Queued)
            && self.history.windows(2).all(|w| w[0].state.can_move_to(w[1].state))
            && self.history.last().map(|t| t.state) == Some(self.state)
    }
}
