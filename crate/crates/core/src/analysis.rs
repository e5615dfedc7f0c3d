//! Summary statistics over processed runs: unusable-response rates, action
//! rates for scenario questions, and grouped scale aggregates with bootstrap
//! confidence intervals.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::config::StatConfig;
use crate::judge::{Judgment, Verdict};
use crate::record::ResponseRecord;
use crate::scoring::ScoreRecord;
use crate::stats::{bootstrap_ci, StatsError};

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("empty input")]
    EmptyInput,
    #[error("no usable (matched) judgments")]
    NoUsableJudgments,
    #[error("unknown group key {key:?}, expected model, group, gender_tag or scale")]
    UnknownGroupKey { key: String },
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// Unusable-response percentages. `invalid` counts validator hits, `rejected`
/// counts valid responses the judge could not pin to one option, and `na` is
/// their sum: everything analysis has to drop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateMetrics {
    pub invalid_pct: f64,
    pub rejected_pct: f64,
    pub na_pct: f64,
}

pub fn rate_metrics(records: &[ResponseRecord]) -> Result<RateMetrics, AnalysisError> {
    if records.is_empty() {
        return Err(AnalysisError::EmptyInput);
    }
    let n = records.len() as f64;
    let invalid = records.iter().filter(|r| !r.validity.is_valid()).count();
    let rejected = records
        .iter()
        .filter(|r| {
            r.validity.is_valid()
                && matches!(
                    r.judgment.as_ref().map(|j| &j.verdict),
                    Some(Verdict::Inconclusive) | Some(Verdict::NotPresent)
                )
        })
        .count();
    let invalid_pct = 100.0 * invalid as f64 / n;
    let rejected_pct = 100.0 * rejected as f64 / n;
    Ok(RateMetrics { invalid_pct, rejected_pct, na_pct: invalid_pct + rejected_pct })
}

/// Percentage of usable (matched) judgments that picked `action_label`.
/// Unusable responses are excluded from the denominator; they are reported
/// separately by `rate_metrics`.
pub fn action_rate(judged: &[Judgment], action_label: &str) -> Result<f64, AnalysisError> {
    if judged.is_empty() {
        return Err(AnalysisError::EmptyInput);
    }
    let mut usable = 0usize;
    let mut action = 0usize;
    for j in judged {
        if let Some(label) = j.matched_label() {
            usable += 1;
            if label == action_label {
                action += 1;
            }
        }
    }
    if usable == 0 {
        return Err(AnalysisError::NoUsableJudgments);
    }
    Ok(100.0 * action as f64 / usable as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    /// Values aligned with the table's `key_names`.
    pub keys: Vec<String>,
    pub scale: String,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Scores with a usable value in this group.
    pub n: usize,
    /// Total missing items across all of the group's scores.
    pub n_missing_total: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateTable {
    pub key_names: Vec<String>,
    pub rows: Vec<AggregateRow>,
}

impl AggregateTable {
    pub fn header(&self) -> Vec<String> {
        let mut h = self.key_names.clone();
        h.extend(
            ["scale", "mean", "ci_low", "ci_high", "n", "n_missing_total"]
                .map(str::to_owned),
        );
        h
    }

    pub fn data_rows(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| {
                let mut row = r.keys.clone();
                row.push(r.scale.clone());
                row.push(r.mean.to_string());
                row.push(r.ci_low.to_string());
                row.push(r.ci_high.to_string());
                row.push(r.n.to_string());
                row.push(r.n_missing_total.to_string());
                row
            })
            .collect()
    }
}

fn resolve_key(key: &str) -> Option<&'static str> {
    match key {
        "model" => Some("model"),
        "group" => Some("group"),
        // "gender" is accepted as a convenience alias.
        "gender_tag" | "gender" => Some("gender_tag"),
        "scale" => Some("scale"),
        _ => None,
    }
}

/// Groups scores by the requested keys (scale is always part of the group)
/// and reports mean plus bootstrap CI per group. Groups without a single
/// usable value are omitted. Rows come out sorted by key values, then scale.
pub fn aggregate(
    scores: &[ScoreRecord],
    group_by: &[String],
    stats: &StatConfig,
) -> Result<AggregateTable, AnalysisError> {
    if scores.is_empty() {
        return Err(AnalysisError::EmptyInput);
    }
    let mut key_names: Vec<&'static str> = Vec::new();
    for key in group_by {
        let resolved =
            resolve_key(key).ok_or_else(|| AnalysisError::UnknownGroupKey { key: key.clone() })?;
        if resolved != "scale" && !key_names.contains(&resolved) {
            key_names.push(resolved);
        }
    }

    let mut groups: BTreeMap<(Vec<String>, String), Vec<&ScoreRecord>> = BTreeMap::new();
    for score in scores {
        let keys: Vec<String> = key_names
            .iter()
            .map(|name| match *name {
                "model" => score.model_id.clone(),
                "group" => score.persona.group.clone(),
                "gender_tag" => score.persona.gender_tag.clone(),
                _ => unreachable!("resolve_key admits no other name"),
            })
            .collect();
        groups.entry((keys, score.scale.clone())).or_default().push(score);
    }

    let mut rows = Vec::new();
    for ((keys, scale), members) in groups {
        let values: Vec<f64> = members.iter().filter_map(|s| s.value).collect();
        if values.is_empty() {
            continue;
        }
        let ci = bootstrap_ci(&values, stats)?;
        rows.push(AggregateRow {
            keys,
            scale,
            mean: values.iter().sum::<f64>() / values.len() as f64,
            ci_low: ci.low,
            ci_high: ci.high,
            n: values.len(),
            n_missing_total: members.iter().map(|s| s.n_missing).sum(),
        });
    }
    Ok(AggregateTable { key_names: key_names.iter().map(|s| s.to_string()).collect(), rows })
}
