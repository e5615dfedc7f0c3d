//! Turning judged answers into scale scores.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::judge::Judgment;
use crate::persona::Persona;
use crate::questionnaire::{Aggregation, Questionnaire, QuestionnaireError, ScaleDefinition};

#[derive(Debug, Error, PartialEq)]
pub enum ScoreError {
    #[error("option value {value} is outside the scale range [{min}, {max}]")]
    ValueOutOfRange { value: i64, min: i64, max: i64 },
    #[error("reverse-presentation label {label} is outside 0..=3")]
    LabelOutOfRange { label: i64 },
    #[error("scale {scale:?} needs question {question:?}, absent from the judged set")]
    MissingQuestion { scale: String, question: String },
    #[error("scale {scale:?} references question {question:?}, absent from the questionnaire")]
    UnknownQuestion { scale: String, question: String },
    #[error("judgment for {question:?} matched option {label:?}, which the question does not have")]
    UnknownOption { question: String, label: String },
    #[error(transparent)]
    Questionnaire(#[from] QuestionnaireError),
}

/// Scoring value of an option under optional reverse coding on the inclusive
/// `range`: plain value `v`, or `min + max - v` when reversed.
pub fn option_value(
    option: &crate::questionnaire::AnswerOption,
    reverse: bool,
    range: (i64, i64),
) -> Result<i64, ScoreError> {
    let v = option.effective_value()?;
    let (min, max) = range;
    if v < min || v > max {
        return Err(ScoreError::ValueOutOfRange { value: v, min, max });
    }
    Ok(if reverse { min + max - v } else { v })
}

/// Recovers the standard 0..3 severity score from a label chosen off the
/// reversed-option presentation: `3 - reverse_label`.
pub fn invert_bdi_score(reverse_label: i64) -> Result<i64, ScoreError> {
    if !(0..=3).contains(&reverse_label) {
        return Err(ScoreError::LabelOutOfRange { label: reverse_label });
    }
    Ok(3 - reverse_label)
}

/// One scored scale for one questionnaire run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledValue {
    pub scale: String,
    /// Aggregate over non-missing items; absent when every item was missing.
    pub value: Option<f64>,
    pub n_items: usize,
    pub n_missing: usize,
}

/// Scores one scale from one run's judgments, keyed by question id. Every
/// scale question must have an entry; `None` marks a response that never
/// reached judging (invalid or failed). Matched judgments contribute their
/// option value with reverse coding applied; everything else counts as
/// missing and is excluded from the aggregate.
pub fn score_scale(
    judged: &BTreeMap<String, Option<Judgment>>,
    scale: &ScaleDefinition,
    questionnaire: &Questionnaire,
) -> Result<ScaledValue, ScoreError> {
    let mut contributions = Vec::new();
    let mut n_missing = 0usize;
    for item in &scale.items {
        let entry = judged.get(&item.question).ok_or_else(|| ScoreError::MissingQuestion {
            scale: scale.name.clone(),
            question: item.question.clone(),
        })?;
        let options = questionnaire.options_for(&item.question).ok_or_else(|| {
            ScoreError::UnknownQuestion {
                scale: scale.name.clone(),
                question: item.question.clone(),
            }
        })?;
        let label = entry.as_ref().and_then(|j| j.matched_label());
        match label {
            None => n_missing += 1,
            Some(label) => {
                let option = options.iter().find(|o| o.label == label).ok_or_else(|| {
                    ScoreError::UnknownOption {
                        question: item.question.clone(),
                        label: label.to_owned(),
                    }
                })?;
                contributions.push(option_value(option, item.reverse, scale.score_range)? as f64);
            }
        }
    }

    let value = if contributions.is_empty() {
        None
    } else {
        let total: f64 = contributions.iter().sum();
        Some(match scale.aggregation {
            Aggregation::Mean => total / contributions.len() as f64,
            Aggregation::Sum => total,
        })
    };
    Ok(ScaledValue { scale: scale.name.clone(), value, n_items: scale.items.len(), n_missing })
}

/// A `ScaledValue` tied to the run that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub model_id: String,
    pub persona: Persona,
    pub seed: u64,
    pub repetition_index: u32,
    pub scale: String,
    pub value: Option<f64>,
    pub n_items: usize,
    pub n_missing: usize,
}

impl ScoreRecord {
    pub fn from_scaled(
        model_id: String,
        persona: Persona,
        seed: u64,
        repetition_index: u32,
        scaled: ScaledValue,
    ) -> Self {
        Self {
            model_id,
            persona,
            seed,
            repetition_index,
            scale: scaled.scale,
            value: scaled.value,
            n_items: scaled.n_items,
            n_missing: scaled.n_missing,
        }
    }
}
