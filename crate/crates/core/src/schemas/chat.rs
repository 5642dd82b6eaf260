//! Size-bounded form of an [`Artifact`] for injection into agent context.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::types::{Artifact, DiffSummary, ModelRef, Operation, Status};

pub const DEFAULT_BUDGET: usize = 4096;
pub const MIN_BUDGET: usize = 256;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ChatError {
    #[error("chat budget {0} is below the minimum of {MIN_BUDGET} bytes")]
    BudgetTooSmall(usize),
    #[error("artifact cannot be compacted below {needed} bytes (budget {budget})")]
    DoesNotFit { needed: usize, budget: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ChatArtifact {
    pub status: Status,
    pub operation: Operation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file_ref: Option<ModelRef>,
    pub summary_line: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diff_summary: Option<DiffSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logical_result: Option<Value>,
    pub truncated: bool,
}

impl ChatArtifact {
    pub fn encoded_len(&self) -> usize {
        serde_json::to_vec(self).map(|v| v.len()).unwrap_or(usize::MAX)
    }

    pub fn is_ok(&self) -> bool {
        self.status == Status::Ok
    }
}

pub fn summary_line(a: &Artifact) -> String {
    let tool = &a.manifest.tool_name;
    match a.status {
        Status::Error => format!("{tool} failed: {}", a.error_message.as_deref().unwrap_or("unknown error")),
        Status::Ok => {
            let target = a.file_ref.as_ref().map(ModelRef::to_string).unwrap_or_else(|| "-".into());
            match (&a.diff_summary, a.manifest.operation) {
                (Some(s), Operation::Create | Operation::Modify) => {
                    let mut parts: Vec<String> = Vec::new();
                    for (ty, c) in &s.per_type {
                        if c.added > 0 {
                            parts.push(format!("+{} {ty}", c.added));
                        }
                        if c.removed > 0 {
                            parts.push(format!("-{} {ty}", c.removed));
                        }
                        if c.modified > 0 {
                            parts.push(format!("~{} {ty}", c.modified));
                        }
                    }
                    let detail = if parts.is_empty() { "no changes".to_string() } else { parts.join(", ") };
                    format!("{tool} ok ({detail}); model {target}")
                }
                (None, Operation::Create | Operation::Modify) => format!("{tool} ok; model {target}"),
                _ => format!("{tool} ok; queried {target}"),
            }
        }
    }
}

fn truncate_chars(s: &str, n: usize) -> &str {
    match s.char_indices().nth(n) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

/// Largest `n` in `0..=max` for which `fits(n)` holds, assuming monotonicity.
fn largest_fitting(max: usize, fits: impl Fn(usize) -> bool) -> Option<usize> {
    if !fits(0) {
        return None;
    }
    let (mut lo, mut hi) = (0, max);
    while lo < hi {
        let mid = lo + (hi - lo).div_ceil(2);
        if fits(mid) {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    Some(lo)
}

/// Compacts an artifact to at most `budget` serialized bytes.
///
/// Reduction order: the logical result becomes a prefix of its JSON text,
/// then the per-type diff table is dropped (totals remain), then the summary
/// line is shortened. Status, operation and fileRef are never altered.
pub fn to_chat_artifact(a: &Artifact, budget: usize) -> Result<ChatArtifact, ChatError> {
    if budget < MIN_BUDGET {
        return Err(ChatError::BudgetTooSmall(budget));
    }
    let mut chat = ChatArtifact {
        status: a.status,
        operation: a.manifest.operation,
        file_ref: a.file_ref.clone(),
        summary_line: summary_line(a),
        diff_summary: a.diff_summary.clone(),
        logical_result: a.logical_result.clone(),
        truncated: false,
    };
    if chat.encoded_len() <= budget {
        return Ok(chat);
    }
    chat.truncated = true;

    if let Some(full) = chat.logical_result.take() {
        let text = serde_json::to_string(&full).unwrap_or_default();
        let total = text.chars().count();
        let attempt = |n: usize| {
            let mut c = chat.clone();
            c.logical_result = Some(Value::String(truncate_chars(&text, n).to_string()));
            c.encoded_len() <= budget
        };
        let n = largest_fitting(total, attempt).unwrap_or(0);
        chat.logical_result = Some(Value::String(truncate_chars(&text, n).to_string()));
        if chat.encoded_len() <= budget {
            return Ok(chat);
        }
    }

    if let Some(s) = chat.diff_summary.as_mut() {
        s.per_type.clear();
        if chat.encoded_len() <= budget {
            return Ok(chat);
        }
    }

    let line = chat.summary_line.clone();
    let total = line.chars().count();
    let attempt = |n: usize| {
        let mut c = chat.clone();
        c.summary_line = truncate_chars(&line, n).to_string();
        c.encoded_len() <= budget
    };
    match largest_fitting(total, attempt) {
        Some(n) => {
            chat.summary_line = truncate_chars(&line, n).to_string();
            Ok(chat)
        }
        None => {
            chat.summary_line.clear();
            Err(ChatError::DoesNotFit { needed: chat.encoded_len(), budget })
        }
    }
}
