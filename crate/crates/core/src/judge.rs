//! Mapping free-text responses onto answer options.
//!
//! Two judges share the verdict vocabulary. The rule-based judge counts
//! occurrences of each option's components in the response and picks the
//! unique maximum. The model-based judge consumes per-option match
//! probabilities from an external classifier, normalizes them and rejects
//! high-entropy distributions as noise.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::EntropyUnits;
use crate::questionnaire::AnswerOption;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Verdict {
    /// The response names exactly one option; `option` is its label.
    Matched { option: String },
    /// Multiple options tie for the strongest evidence.
    Inconclusive,
    /// No option is recognizable in the response.
    NotPresent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JudgeMethod {
    Rule,
    Model,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionScore {
    pub option: String,
    /// Overlap count (rule judge) or normalized probability (model judge).
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Judgment {
    pub method: JudgeMethod,
    pub verdict: Verdict,
    pub scores: Vec<OptionScore>,
    /// Distribution entropy, model judge only, in the configured units.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entropy: Option<f64>,
}

impl Judgment {
    pub fn matched_label(&self) -> Option<&str> {
        match &self.verdict {
            Verdict::Matched { option } => Some(option),
            _ => None,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum JudgeError {
    #[error("no options to judge against")]
    NoOptions,
    #[error("probability {value} is outside [0, 1]")]
    ProbabilityOutOfRange { value: f64 },
    #[error("distribution entry {value} is negative")]
    NegativeEntry { value: f64 },
    #[error("distribution sums to {sum}, expected 1")]
    NotNormalized { sum: f64 },
}

/// Splits an option into its numeric component (the label) and its label
/// component (the text), e.g. `5. very often` into `("5", "very often")`.
pub fn tokenize_option(option: &AnswerOption) -> (&str, &str) {
    (&option.label, &option.text)
}

fn normalize_ws(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Occurrences of `token` that stand alone as a word: the neighboring bytes,
/// where present, are not ASCII alphanumeric. Keeps `5` from matching inside
/// `15` or `50`.
fn count_word_bounded(text: &str, token: &str) -> usize {
    if token.is_empty() {
        return 0;
    }
    let bytes = text.as_bytes();
    text.match_indices(token)
        .filter(|(i, _)| {
            let before_ok = *i == 0 || !bytes[i - 1].is_ascii_alphanumeric();
            let end = i + token.len();
            let after_ok = end == bytes.len() || !bytes[end].is_ascii_alphanumeric();
            before_ok && after_ok
        })
        .count()
}

/// Non-overlapping case-insensitive substring occurrences.
fn count_substring_ci(haystack: &str, needle: &str) -> usize {
    if needle.is_empty() {
        return 0;
    }
    haystack.to_lowercase().match_indices(&needle.to_lowercase()).count()
}

/// Token-overlap judge. Per option, overlap = word-bounded occurrences of the
/// numeric component plus substring occurrences of the non-empty label
/// component, both on whitespace-normalized text. Unique maximum wins; a tied
/// positive maximum is inconclusive; all zeros means no answer present.
pub fn judge_rule_based(text: &str, options: &[AnswerOption]) -> Judgment {
    let norm = normalize_ws(text);
    let mut scores = Vec::with_capacity(options.len());
    for option in options {
        let (numeric, label) = tokenize_option(option);
        let mut overlap = count_word_bounded(&norm, numeric.trim());
        if !label.trim().is_empty() {
            overlap += count_substring_ci(&norm, &normalize_ws(label));
        }
        scores.push(OptionScore { option: option.label.clone(), score: overlap as f64 });
    }

    let max = scores.iter().map(|s| s.score).fold(0.0, f64::max);
    let verdict = if max == 0.0 {
        Verdict::NotPresent
    } else {
        let mut leaders = scores.iter().filter(|s| s.score == max);
        let first = leaders.next().expect("positive max has a witness");
        if leaders.next().is_none() {
            Verdict::Matched { option: first.option.clone() }
        } else {
            Verdict::Inconclusive
        }
    };
    Judgment { method: JudgeMethod::Rule, verdict, scores, entropy: None }
}

/// Shannon entropy in nats, with 0 ln 0 := 0. The input must be a
/// distribution: non-negative entries summing to 1 within 1e-9.
pub fn entropy(dist: &[f64]) -> Result<f64, JudgeError> {
    let mut sum = 0.0;
    for &p in dist {
        if p < 0.0 {
            return Err(JudgeError::NegativeEntry { value: p });
        }
        sum += p;
    }
    if (sum - 1.0).abs() > 1e-9 {
        return Err(JudgeError::NotNormalized { sum });
    }
    Ok(-dist.iter().filter(|&&p| p > 0.0).map(|&p| p * p.ln()).sum::<f64>())
}

/// Decision step of the model-based judge over per-option match
/// probabilities. All-zero input short-circuits to no answer; otherwise the
/// vector is normalized, its entropy compared against `threshold` in the
/// requested units, and the unique argmax reported on acceptance.
pub fn judge_model_based(
    probabilities: &[(String, f64)],
    threshold: f64,
    units: EntropyUnits,
) -> Result<Judgment, JudgeError> {
    if probabilities.is_empty() {
        return Err(JudgeError::NoOptions);
    }
    for &(_, p) in probabilities {
        if !(0.0..=1.0).contains(&p) {
            return Err(JudgeError::ProbabilityOutOfRange { value: p });
        }
    }
    let total: f64 = probabilities.iter().map(|(_, p)| p).sum();
    if total == 0.0 {
        let scores = probabilities
            .iter()
            .map(|(label, _)| OptionScore { option: label.clone(), score: 0.0 })
            .collect();
        return Ok(Judgment {
            method: JudgeMethod::Model,
            verdict: Verdict::NotPresent,
            scores,
            entropy: None,
        });
    }

    let normalized: Vec<f64> = probabilities.iter().map(|(_, p)| p / total).collect();
    let nats = entropy(&normalized)?;
    let e = match units {
        EntropyUnits::Nats => nats,
        EntropyUnits::Bits => nats / std::f64::consts::LN_2,
    };
    let scores: Vec<OptionScore> = probabilities
        .iter()
        .zip(&normalized)
        .map(|((label, _), &p)| OptionScore { option: label.clone(), score: p })
        .collect();

    let verdict = if e > threshold {
        Verdict::NotPresent
    } else {
        let max = normalized.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut leaders = scores.iter().filter(|s| s.score == max);
        let first = leaders.next().expect("nonempty input has a max");
        if leaders.next().is_none() {
            Verdict::Matched { option: first.option.clone() }
        } else {
            Verdict::Inconclusive
        }
    };
    Ok(Judgment { method: JudgeMethod::Model, verdict, scores, entropy: Some(e) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rfq_options() -> Vec<AnswerOption> {
        vec![
            AnswerOption::new("1", "never or seldom"),
            AnswerOption::new("2", ""),
            AnswerOption::new("3", "sometimes"),
            AnswerOption::new("4", ""),
            AnswerOption::new("5", "very often"),
        ]
    }

    fn counts(j: &Judgment) -> Vec<f64> {
        j.scores.iter().map(|s| s.score).collect()
    }

    #[test]
    fn tokenize_splits_label_and_text() {
        let o = AnswerOption::new("5", "very often");
        assert_eq!(tokenize_option(&o), ("5", "very often"));
        let bare = AnswerOption::new("2", "");
        assert_eq!(tokenize_option(&bare), ("2", ""));
    }

    #[test]
    fn direct_answer_matches_with_overlap_two() {
        let j = judge_rule_based("3. sometimes", &rfq_options());
        assert_eq!(j.verdict, Verdict::Matched { option: "3".into() });
        assert_eq!(counts(&j), vec![0.0, 0.0, 2.0, 0.0, 0.0]);
    }

    #[test]
    fn competing_mentions_are_inconclusive() {
        let j = judge_rule_based(
            "My answer is neither Option 1 nor 4. My answer is Item 5.",
            &rfq_options(),
        );
        assert_eq!(j.verdict, Verdict::Inconclusive);
        assert_eq!(counts(&j), vec![1.0, 0.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn unrelated_text_is_not_present() {
        let j = judge_rule_based("I love turtles", &rfq_options());
        assert_eq!(j.verdict, Verdict::NotPresent);
        assert_eq!(counts(&j), vec![0.0; 5]);
    }

    #[test]
    fn casing_and_whitespace_do_not_matter() {
        let a = judge_rule_based("I'd   say  SOMETIMES,\nso 3.", &rfq_options());
        let b = judge_rule_based("I'd say sometimes, so 3.", &rfq_options());
        assert_eq!(a, b);
        assert_eq!(a.verdict, Verdict::Matched { option: "3".into() });
    }

    #[test]
    fn numerals_inside_numbers_do_not_count() {
        let j = judge_rule_based("I rate it 15 out of 100", &rfq_options());
        assert_eq!(j.verdict, Verdict::NotPresent);
    }

    #[test]
    fn option_text_with_digits_still_resolves() {
        let options = vec![
            AnswerOption::new("0", "I sleep as well as usual"),
            AnswerOption::new("1", "I sleep 1-2 hours less than usual"),
        ];
        let j = judge_rule_based("1. I sleep 1-2 hours less than usual", &options);
        assert_eq!(j.verdict, Verdict::Matched { option: "1".into() });
    }

    #[test]
    fn entropy_closed_forms() {
        assert_eq!(entropy(&[1.0, 0.0, 0.0, 0.0, 0.0]).unwrap(), 0.0);
        assert!((entropy(&[0.2; 5]).unwrap() - 5.0_f64.ln()).abs() < 1e-12);
        assert!((entropy(&[0.5, 0.5]).unwrap() - 2.0_f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn entropy_rejects_bad_input() {
        assert_eq!(entropy(&[0.5, 0.6]), Err(JudgeError::NotNormalized { sum: 1.1 }));
        assert_eq!(entropy(&[-0.1, 1.1]), Err(JudgeError::NegativeEntry { value: -0.1 }));
        assert!(matches!(entropy(&[]), Err(JudgeError::NotNormalized { .. })));
    }

    fn labeled(probs: &[f64]) -> Vec<(String, f64)> {
        probs.iter().enumerate().map(|(i, &p)| ((i + 1).to_string(), p)).collect()
    }

    #[test]
    fn dominant_probability_matches() {
        let j = judge_model_based(&labeled(&[0.99, 0.01, 0.01, 0.01, 0.01]), 0.359, EntropyUnits::Nats)
            .unwrap();
        assert_eq!(j.verdict, Verdict::Matched { option: "1".into() });
        let e = j.entropy.unwrap();
        assert!((0.20..0.24).contains(&e), "entropy {e}");
        let total: f64 = j.scores.iter().map(|s| s.score).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_probabilities_are_rejected_as_noise() {
        let j = judge_model_based(&labeled(&[0.2; 5]), 0.359, EntropyUnits::Nats).unwrap();
        assert_eq!(j.verdict, Verdict::NotPresent);
        assert!((j.entropy.unwrap() - 5.0_f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn all_zero_probabilities_mean_no_answer() {
        let j = judge_model_based(&labeled(&[0.0, 0.0, 0.0]), 0.359, EntropyUnits::Nats).unwrap();
        assert_eq!(j.verdict, Verdict::NotPresent);
        assert_eq!(j.entropy, None);
        assert_eq!(counts(&j), vec![0.0; 3]);
    }

    #[test]
    fn tie_below_threshold_is_inconclusive() {
        let j = judge_model_based(&labeled(&[0.4, 0.4, 0.0]), 2.0, EntropyUnits::Nats).unwrap();
        assert_eq!(j.verdict, Verdict::Inconclusive);
    }

    #[test]
    fn bits_mode_rescales_the_comparison() {
        let probs = labeled(&[0.5, 0.5]);
        let nats = judge_model_based(&probs, 0.9, EntropyUnits::Nats).unwrap();
        assert_eq!(nats.verdict, Verdict::Inconclusive);
        assert!((nats.entropy.unwrap() - 2.0_f64.ln()).abs() < 1e-12);
        let bits = judge_model_based(&probs, 0.9, EntropyUnits::Bits).unwrap();
        assert_eq!(bits.verdict, Verdict::NotPresent);
        assert!((bits.entropy.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn out_of_range_probability_is_an_error() {
        assert!(matches!(
            judge_model_based(&labeled(&[1.2]), 0.359, EntropyUnits::Nats),
            Err(JudgeError::ProbabilityOutOfRange { .. })
        ));
        assert_eq!(
            judge_model_based(&[], 0.359, EntropyUnits::Nats),
            Err(JudgeError::NoOptions)
        );
    }

    #[test]
    fn verdict_serde_shape() {
        let m = serde_json::to_value(Verdict::Matched { option: "3".into() }).unwrap();
        assert_eq!(m, serde_json::json!({"kind": "matched", "option": "3"}));
        let n = serde_json::to_value(Verdict::NotPresent).unwrap();
        assert_eq!(n, serde_json::json!({"kind": "not_present"}));
        let i = serde_json::to_value(Verdict::Inconclusive).unwrap();
        assert_eq!(i, serde_json::json!({"kind": "inconclusive"}));
    }

    proptest! {
        #[test]
        fn entropy_never_exceeds_ln_n(raw in proptest::collection::vec(0.01f64..1.0, 1..10)) {
            let total: f64 = raw.iter().sum();
            let dist: Vec<f64> = raw.iter().map(|p| p / total).collect();
            let e = entropy(&dist).unwrap();
            prop_assert!(e <= (dist.len() as f64).ln() + 1e-9);
            prop_assert!(e >= 0.0);
        }

        #[test]
        fn model_verdict_survives_positive_rescaling(
            raw in proptest::collection::vec(0.0f64..1.0, 1..8),
            scale in 0.05f64..1.0,
        ) {
            let a = judge_model_based(&labeled(&raw), 0.359, EntropyUnits::Nats).unwrap();
            let scaled: Vec<f64> = raw.iter().map(|p| p * scale).collect();
            let b = judge_model_based(&labeled(&scaled), 0.359, EntropyUnits::Nats).unwrap();
            prop_assert_eq!(a.verdict, b.verdict);
        }

        #[test]
        fn irrelevant_suffix_never_unseats_a_match(
            response in "[1-5]\\. (sometimes|very often|never or seldom)",
            suffix in "[!?.,;:()\\- ]{0,40}",
        ) {
            let options = rfq_options();
            let before = judge_rule_based(&response, &options);
            let after = judge_rule_based(&format!("{response} {suffix}"), &options);
            if matches!(before.verdict, Verdict::Matched { .. }) {
                prop_assert_eq!(before.verdict, after.verdict);
            }
        }

        #[test]
        fn synthetic_display_answers_match_their_option(i in 0usize..4) {
            let options = vec![
                AnswerOption::new("1", "strongly disagree"),
                AnswerOption::new("2", "neither"),
                AnswerOption::new("3", "agree somewhat"),
                AnswerOption::new("4", "fully behind it"),
            ];
            let response = options[i].display();
            let j = judge_rule_based(&response, &options);
            prop_assert_eq!(j.verdict, Verdict::Matched { option: options[i].label.clone() });
        }

        #[test]
        fn scores_permute_with_options(seed in 0u64..64) {
            let mut options = rfq_options();
            let response = "I pick 3. sometimes over 5.";
            let base = judge_rule_based(response, &options);
            options.rotate_left((seed % 5) as usize);
            let rotated = judge_rule_based(response, &options);
            for s in &base.scores {
                let twin = rotated.scores.iter().find(|t| t.option == s.option).unwrap();
                prop_assert_eq!(twin.score, s.score);
            }
        }
    }
}
