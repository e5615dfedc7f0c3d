//! Pipeline record types: what the runner writes and what postprocessing
//! turns it into. Task fields are flattened in first so each JSONL line is
//! self-identifying.

use serde::{Deserialize, Serialize};

use crate::judge::Judgment;
use crate::plan::RunTask;
use crate::validity::Validity;

/// One generation attempt as persisted by the runner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawResponse {
    #[serde(flatten)]
    pub task: RunTask,
    pub text: String,
    pub latency_ms: u64,
    pub retry_count: u32,
    /// Provider extras (token usage, request ids) worth keeping but never
    /// interpreted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint_meta: Option<serde_json::Value>,
    /// Transport-level failure; set means `text` is empty and the task is
    /// eligible for resume.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RawResponse {
    pub fn succeeded(&self) -> bool {
        self.error.is_none()
    }
}

/// A raw response after cleaning, validation and (when valid) judging.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseRecord {
    #[serde(flatten)]
    pub task: RunTask,
    pub raw_text: String,
    pub cleaned_text: String,
    /// Answer pulled from an embedded JSON object, when one was found; the
    /// judge prefers it over the full cleaned text.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extracted_answer: Option<String>,
    pub validity: Validity,
    /// Present exactly when the record is valid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub judgment: Option<Judgment>,
}
