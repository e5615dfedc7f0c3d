//! Questionnaire content: questions, answer options, and scoring scales.
//!
//! A questionnaire either carries one global option scale shared by every
//! question or per-question option lists. Options pair a short label, usually
//! a numeral, with an optional descriptive text; incompletely labeled scales
//! (e.g. `1. never or seldom, 2., 3. sometimes`) leave the text empty on the
//! unlabeled steps.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnswerOption {
    pub label: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub text: String,
    /// Numeric value used for scoring. Defaults to the integer parse of the
    /// label, so it only needs to be spelled out when the two differ (e.g.
    /// after option inversion).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<i64>,
}

impl AnswerOption {
    pub fn new(label: impl Into<String>, text: impl Into<String>) -> Self {
        Self { label: label.into(), text: text.into(), value: None }
    }

    /// Display form as presented to the respondent: `"3."` or `"3. sometimes"`.
    pub fn display(&self) -> String {
        if self.text.is_empty() {
            format!("{}.", self.label)
        } else {
            format!("{}. {}", self.label, self.text)
        }
    }

    /// Scoring value: the explicit `value` if set, otherwise the integer parse
    /// of the label.
    pub fn effective_value(&self) -> Result<i64, QuestionnaireError> {
        match self.value {
            Some(v) => Ok(v),
            None => self.label.trim().parse().map_err(|_| QuestionnaireError::UnparsableLabel {
                label: self.label.clone(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuestionItem {
    pub id: String,
    pub text: String,
    /// Per-question options; empty means the questionnaire's `global_options`
    /// apply.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub options: Vec<AnswerOption>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregation {
    Mean,
    Sum,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaleItem {
    pub question: String,
    #[serde(default)]
    pub reverse: bool,
}

/// A named subscale: which questions it draws on, whether each is
/// reverse-coded, and the value range options live on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaleDefinition {
    pub name: String,
    pub aggregation: Aggregation,
    /// Inclusive (min, max) of per-item values; reverse coding maps `v` to
    /// `min + max - v`.
    pub score_range: (i64, i64),
    pub items: Vec<ScaleItem>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Questionnaire {
    pub id: String,
    pub instruction: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub global_options: Vec<AnswerOption>,
    pub questions: Vec<QuestionItem>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub scales: Vec<ScaleDefinition>,
}

impl Questionnaire {
    pub fn question(&self, id: &str) -> Option<&QuestionItem> {
        self.questions.iter().find(|q| q.id == id)
    }

    /// The options presented for `question`: its own list, or the global one.
    pub fn effective_options<'a>(&'a self, question: &'a QuestionItem) -> &'a [AnswerOption] {
        if question.options.is_empty() {
            &self.global_options
        } else {
            &question.options
        }
    }

    pub fn options_for(&self, question_id: &str) -> Option<&[AnswerOption]> {
        self.question(question_id).map(|q| self.effective_options(q))
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum QuestionnaireError {
    #[error("option label {label:?} is not an integer and has no explicit value")]
    UnparsableLabel { label: String },
    #[error("question {question:?}: option label {label:?} is not an integer, cannot invert")]
    NonIntegerLabel { question: String, label: String },
}

/// Reverses every option list: order inverted, labels reassigned `0..k` in the
/// new order, and each option's original scoring value pinned via `value` so
/// downstream scoring is unaffected by the presentation order.
///
/// Applies to the global option list and to every per-question list. All
/// labels must parse as integers.
pub fn invert_questionnaire_options(q: &Questionnaire) -> Result<Questionnaire, QuestionnaireError> {
    let invert = |opts: &[AnswerOption], question: &str| -> Result<Vec<AnswerOption>, QuestionnaireError> {
        for o in opts {
            if o.label.trim().parse::<i64>().is_err() {
                return Err(QuestionnaireError::NonIntegerLabel {
                    question: question.to_owned(),
                    label: o.label.clone(),
                });
            }
        }
        let mut out = Vec::with_capacity(opts.len());
        for (i, o) in opts.iter().rev().enumerate() {
            out.push(AnswerOption {
                label: i.to_string(),
                text: o.text.clone(),
                value: Some(o.effective_value()?),
            });
        }
        Ok(out)
    };

    let mut inverted = q.clone();
    if !q.global_options.is_empty() {
        inverted.global_options = invert(&q.global_options, "<global>")?;
    }
    for (slot, question) in inverted.questions.iter_mut().zip(&q.questions) {
        if !question.options.is_empty() {
            slot.options = invert(&question.options, &question.id)?;
        }
    }
    Ok(inverted)
}
