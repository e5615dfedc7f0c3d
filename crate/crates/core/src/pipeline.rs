//! Postprocessing and scoring glue: raw responses in, judged records and
//! per-run scale scores out.

use std::collections::BTreeMap;
use std::collections::HashMap;

use thiserror::Error;

use crate::clean::{clean_response, extract_json_answer};
use crate::config::JudgeConfig;
use crate::judge::{judge_model_based, judge_rule_based, JudgeError, Judgment};
use crate::persona::Persona;
use crate::questionnaire::Questionnaire;
use crate::record::{RawResponse, ResponseRecord};
use crate::scoring::{score_scale, ScoreError, ScoreRecord};
use crate::validity::{validate_response, RefusalRules, Validity};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("question {question_id} is not part of the questionnaire")]
    UnknownQuestion { question_id: String },
    #[error("question {question_id} has no answer options")]
    NoOptions { question_id: String },
    #[error("provider returned {got} probabilities for {expected} options")]
    ProbabilityCount { expected: usize, got: usize },
    #[error(transparent)]
    Judge(#[from] JudgeError),
    #[error(transparent)]
    Score(#[from] ScoreError),
}

/// Cleans, extracts and validates one raw response. Generation failures
/// become invalid records; nothing is judged yet.
pub fn prepare_record(raw: &RawResponse, rules: &RefusalRules) -> ResponseRecord {
    let cleaned = clean_response(&raw.text);
    if let Some(error) = &raw.error {
        return ResponseRecord {
            task: raw.task.clone(),
            raw_text: raw.text.clone(),
            cleaned_text: cleaned,
            extracted_answer: None,
            validity: Validity::Invalid { reason: format!("generation error: {error}") },
            judgment: None,
        };
    }
    let extracted_answer = extract_json_answer(&cleaned);
    let validity = validate_response(&cleaned, rules);
    ResponseRecord {
        task: raw.task.clone(),
        raw_text: raw.text.clone(),
        cleaned_text: cleaned,
        extracted_answer,
        validity,
        judgment: None,
    }
}

/// What the judge reads: the extracted JSON answer when present, otherwise
/// the whole cleaned text.
pub fn judge_input(record: &ResponseRecord) -> &str {
    record.extracted_answer.as_deref().unwrap_or(&record.cleaned_text)
}

fn question_options<'a>(
    questionnaire: &'a Questionnaire,
    question_id: &str,
) -> Result<&'a [crate::questionnaire::AnswerOption], PipelineError> {
    let options = questionnaire
        .options_for(question_id)
        .ok_or_else(|| PipelineError::UnknownQuestion { question_id: question_id.to_owned() })?;
    if options.is_empty() {
        return Err(PipelineError::NoOptions { question_id: question_id.to_owned() });
    }
    Ok(options)
}

/// Full postprocessing with the rule-based judge.
pub fn postprocess_rule(
    raw: &RawResponse,
    questionnaire: &Questionnaire,
    rules: &RefusalRules,
) -> Result<ResponseRecord, PipelineError> {
    let mut record = prepare_record(raw, rules);
    if record.validity.is_valid() {
        let options = question_options(questionnaire, &record.task.question_id)?;
        record.judgment = Some(judge_rule_based(judge_input(&record), options));
    }
    Ok(record)
}

/// What the probability provider needs for one record, plus the option
/// labels its reply maps back onto.
#[derive(Debug, Clone, PartialEq)]
pub struct JudgeRequest {
    pub response_text: String,
    pub option_labels: Vec<String>,
    pub option_displays: Vec<String>,
}

/// The provider call for a prepared record, or `None` when the record is
/// invalid and skips judging.
pub fn model_judge_request(
    record: &ResponseRecord,
    questionnaire: &Questionnaire,
) -> Result<Option<JudgeRequest>, PipelineError> {
    if !record.validity.is_valid() {
        return Ok(None);
    }
    let options = question_options(questionnaire, &record.task.question_id)?;
    Ok(Some(JudgeRequest {
        response_text: judge_input(record).to_owned(),
        option_labels: options.iter().map(|o| o.label.clone()).collect(),
        option_displays: options.iter().map(|o| o.display()).collect(),
    }))
}

/// Attaches a model judgment from provider probabilities, one per option in
/// request order.
pub fn apply_model_judgment(
    record: &mut ResponseRecord,
    request: &JudgeRequest,
    probabilities: &[f64],
    judge: &JudgeConfig,
) -> Result<(), PipelineError> {
    if probabilities.len() != request.option_labels.len() {
        return Err(PipelineError::ProbabilityCount {
            expected: request.option_labels.len(),
            got: probabilities.len(),
        });
    }
    let labeled: Vec<(String, f64)> =
        request.option_labels.iter().cloned().zip(probabilities.iter().copied()).collect();
    record.judgment =
        Some(judge_model_based(&labeled, judge.entropy_threshold, judge.entropy_units)?);
    Ok(())
}

type RunKey = (String, Persona, u64, u32);

/// Scores every run found in the records on every scale. Records are
/// grouped by model, persona, seed and repetition; groups are emitted in
/// first-appearance order so scoring a sink file yields a stable layout.
pub fn score_records(
    records: &[ResponseRecord],
    questionnaire: &Questionnaire,
) -> Result<Vec<ScoreRecord>, PipelineError> {
    let mut order: Vec<RunKey> = Vec::new();
    let mut by_run: HashMap<RunKey, BTreeMap<String, Option<Judgment>>> = HashMap::new();
    for record in records {
        let key: RunKey = (
            record.task.model_id.clone(),
            record.task.persona.clone(),
            record.task.seed,
            record.task.repetition_index,
        );
        if !by_run.contains_key(&key) {
            order.push(key.clone());
        }
        by_run
            .entry(key)
            .or_default()
            .insert(record.task.question_id.clone(), record.judgment.clone());
    }

    let mut scores = Vec::new();
    for key in order {
        let judged = &by_run[&key];
        for scale in &questionnaire.scales {
            let scaled = score_scale(judged, scale, questionnaire)?;
            scores.push(ScoreRecord::from_scaled(
                key.0.clone(),
                key.1.clone(),
                key.2,
                key.3,
                scaled,
            ));
        }
    }
    Ok(scores)
}
