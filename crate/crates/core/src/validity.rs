//! Refusal detection: flags responses that apologize, decline or lecture
//! instead of answering.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Validity {
    Valid,
    Invalid { reason: String },
}

impl Validity {
    pub fn is_valid(&self) -> bool {
        matches!(self, Validity::Valid)
    }
}

/// Ordered refusal phrases; the first match becomes the invalidity reason.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RefusalRules {
    pub phrases: Vec<String>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RuleParseError {
    #[error("refusal rule list contains no phrases")]
    Empty,
}

impl RefusalRules {
    /// The default phrase list compiled into the binary.
    pub fn builtin() -> Self {
        Self::parse(include_str!("../data/refusal_phrases.txt"))
            .expect("built-in refusal phrases")
    }

    /// One phrase per line; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self, RuleParseError> {
        let phrases: Vec<String> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_owned)
            .collect();
        if phrases.is_empty() {
            return Err(RuleParseError::Empty);
        }
        Ok(Self { phrases })
    }
}

/// Case-insensitive substring check of each phrase in order over the cleaned
/// response text.
pub fn validate_response(text: &str, rules: &RefusalRules) -> Validity {
    let lowered = text.to_lowercase();
    for phrase in &rules.phrases {
        if lowered.contains(&phrase.to_lowercase()) {
            return Validity::Invalid { reason: phrase.clone() };
        }
    }
    Validity::Valid
}
