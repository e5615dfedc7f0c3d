//! Training and evaluation data for the model-based judge: labeled
//! (option, response) pairs from handcrafted templates, negative sampling,
//! paraphrase prompt construction, similarity filtering, entropy threshold
//! selection and bootstrap F1 evaluation.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::judge::Judgment;
use crate::prompt::{render_template, PromptError, PromptPair};
use crate::questionnaire::AnswerOption;
use crate::stats::{percentile_linear, StatsError};

/// Placeholder the response templates use for the answer option.
pub const ANSWER_PLACEHOLDER: &str = "<answer option>";

/// Class name that stands in for judgments without a usable option.
pub const NO_ANSWER_CLASS: &str = "no-answer";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairLabel {
    Corresponds,
    NotCorresponds,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairOrigin {
    Template,
    Paraphrase,
}

/// One labeled training example for the judge classifier.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgePair {
    /// Canonical combined display of the option, e.g. `3. sometimes`.
    pub option_display: String,
    pub response_text: String,
    pub label: PairLabel,
    pub origin: PairOrigin,
}

/// An annotated judge decision used for threshold calibration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledEntropy {
    pub entropy: f64,
    pub gold: GoldLabel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoldLabel {
    /// The model judge's argmax option was correct.
    Match,
    /// The response should be rejected.
    Noise,
}

#[derive(Debug, Error, PartialEq)]
pub enum JudgeDataError {
    #[error("template {index} contains {count} answer-option placeholders, expected exactly 1")]
    BadPlaceholder { index: usize, count: usize },
    #[error("negative sampling needs at least 2 distinct option displays")]
    NotEnoughOptions,
    #[error("cannot sample {k} strategies out of {available}")]
    BadStrategyCount { k: usize, available: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("similarity scores must be finite")]
    NonFiniteSimilarity,
    #[error("entropy values must be finite")]
    NonFiniteEntropy,
    #[error("threshold selection needs at least one match and one noise point")]
    NeedBothClasses,
    #[error("{predictions} predictions but {gold} gold labels")]
    LengthMismatch { predictions: usize, gold: usize },
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// The 67 handcrafted response templates compiled into the binary, one per
/// line, each containing the answer-option placeholder once.
pub fn builtin_judge_templates() -> Vec<String> {
    include_str!("../data/judge_templates.txt").lines().map(str::to_owned).collect()
}

/// The 61 paraphrasing strategy descriptions, one per line.
pub fn builtin_paraphrase_strategies() -> Vec<String> {
    include_str!("../data/paraphrase_strategies.txt").lines().map(str::to_owned).collect()
}

pub fn builtin_paraphrase_system() -> String {
    include_str!("../data/paraphrase_system.txt").to_owned()
}

pub fn builtin_paraphrase_user_template() -> String {
    include_str!("../data/paraphrase_user.txt").to_owned()
}

/// Crosses templates with options in three response formats: numeric only
/// (`1.`), text only (`never or seldom`), and combined (`1. never or
/// seldom`). The text-only format is skipped for options without text. All
/// pairs are positives of template origin.
pub fn generate_seed_pairs(
    templates: &[String],
    options: &[AnswerOption],
) -> Result<Vec<JudgePair>, JudgeDataError> {
    for (index, template) in templates.iter().enumerate() {
        let count = template.matches(ANSWER_PLACEHOLDER).count();
        if count != 1 {
            return Err(JudgeDataError::BadPlaceholder { index, count });
        }
    }
    let mut pairs = Vec::new();
    for template in templates {
        for option in options {
            let mut formats = vec![format!("{}.", option.label)];
            if !option.text.is_empty() {
                formats.push(option.text.clone());
            }
            formats.push(option.display());
            for format in formats {
                pairs.push(JudgePair {
                    option_display: option.display(),
                    response_text: template.replacen(ANSWER_PLACEHOLDER, &format, 1),
                    label: PairLabel::Corresponds,
                    origin: PairOrigin::Template,
                });
            }
        }
    }
    Ok(pairs)
}

/// Draws `ratio` negatives per positive by swapping the option for a
/// uniformly chosen different one; response text is kept.
///
/// Deterministic resampling contract: the option pool is the distinct
/// `option_display` values of the positives in first-appearance order; a
/// `ChaCha8Rng` seeded with `seed_from_u64(rng_seed)` draws, for each
/// positive in input order, `ratio` indices via `random_range(0..m)` into the
/// pool with the positive's own display removed (`m` = pool size - 1).
pub fn sample_negatives(
    positives: &[JudgePair],
    ratio: u32,
    rng_seed: u64,
) -> Result<Vec<JudgePair>, JudgeDataError> {
    let mut pool: Vec<&str> = Vec::new();
    for p in positives {
        if !pool.contains(&p.option_display.as_str()) {
            pool.push(&p.option_display);
        }
    }
    if pool.len() < 2 {
        return Err(JudgeDataError::NotEnoughOptions);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut negatives = Vec::with_capacity(positives.len() * ratio as usize);
    for positive in positives {
        let others: Vec<&str> =
            pool.iter().copied().filter(|d| *d != positive.option_display).collect();
        for _ in 0..ratio {
            let chosen = others[rng.random_range(0..others.len())];
            negatives.push(JudgePair {
                option_display: chosen.to_owned(),
                response_text: positive.response_text.clone(),
                label: PairLabel::NotCorresponds,
                origin: positive.origin,
            });
        }
    }
    Ok(negatives)
}

/// Builds one paraphrasing prompt per pair: `k` strategies sampled without
/// replacement (partial Fisher-Yates over the strategy indices, fresh draws
/// per pair from one `ChaCha8Rng` seeded with `rng_seed`), joined with
/// newlines into the user template's strategy slot; the pair's response text
/// becomes the statement. Running the prompts against a model is external.
pub fn build_paraphrase_prompts(
    pairs: &[JudgePair],
    strategies: &[String],
    k: usize,
    rng_seed: u64,
) -> Result<Vec<PromptPair>, JudgeDataError> {
    if k == 0 || k > strategies.len() {
        return Err(JudgeDataError::BadStrategyCount { k, available: strategies.len() });
    }
    let system = builtin_paraphrase_system();
    let user_template = builtin_paraphrase_user_template();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut prompts = Vec::with_capacity(pairs.len());
    for pair in pairs {
        let mut indices: Vec<usize> = (0..strategies.len()).collect();
        for i in 0..k {
            let j = rng.random_range(i..indices.len());
            indices.swap(i, j);
        }
        let chosen: Vec<&str> = indices[..k].iter().map(|&i| strategies[i].as_str()).collect();
        let user = render_template(
            &user_template,
            &[("strategies", &chosen.join("\n")), ("statement", &pair.response_text)],
        )?;
        prompts.push(PromptPair { system: system.clone(), user });
    }
    Ok(prompts)
}

/// Drops pairs whose externally computed similarity falls below the given
/// percentile of all scores (linear interpolation); ties with the threshold
/// are kept.
pub fn filter_by_similarity(
    scored: &[(JudgePair, f64)],
    percentile: f64,
) -> Result<Vec<JudgePair>, JudgeDataError> {
    if scored.is_empty() {
        return Err(JudgeDataError::EmptyInput);
    }
    if scored.iter().any(|(_, s)| !s.is_finite()) {
        return Err(JudgeDataError::NonFiniteSimilarity);
    }
    let mut scores: Vec<f64> = scored.iter().map(|(_, s)| *s).collect();
    scores.sort_by(f64::total_cmp);
    let threshold = percentile_linear(&scores, percentile)?;
    Ok(scored.iter().filter(|(_, s)| *s >= threshold).map(|(p, _)| p.clone()).collect())
}

/// Picks the entropy cutoff that best separates matches from noise: the mean
/// of the lowest and highest observed entropy values achieving maximal
/// accuracy.
///
/// Because the decision rule rejects strictly above the cutoff, an observed
/// value separates best either just below or just at itself; both readings
/// (`entropy > v` and `entropy >= v` assigning noise) are evaluated and the
/// better one counts as that value's accuracy.
pub fn select_entropy_threshold(points: &[LabeledEntropy]) -> Result<f64, JudgeDataError> {
    if points.iter().any(|p| !p.entropy.is_finite()) {
        return Err(JudgeDataError::NonFiniteEntropy);
    }
    let has_match = points.iter().any(|p| p.gold == GoldLabel::Match);
    let has_noise = points.iter().any(|p| p.gold == GoldLabel::Noise);
    if !has_match || !has_noise {
        return Err(JudgeDataError::NeedBothClasses);
    }

    let mut values: Vec<f64> = points.iter().map(|p| p.entropy).collect();
    values.sort_by(f64::total_cmp);
    values.dedup();

    let accuracy = |noise_at: &dyn Fn(f64) -> bool| -> f64 {
        let correct = points
            .iter()
            .filter(|p| {
                let as_noise = noise_at(p.entropy);
                (p.gold == GoldLabel::Noise) == as_noise
            })
            .count();
        correct as f64 / points.len() as f64
    };

    let mut best_acc = f64::NEG_INFINITY;
    let mut best_values: Vec<f64> = Vec::new();
    for &v in &values {
        let strict = accuracy(&|e| e > v);
        let inclusive = accuracy(&|e| e >= v);
        let acc = strict.max(inclusive);
        if acc > best_acc {
            best_acc = acc;
            best_values.clear();
        }
        if acc == best_acc {
            best_values.push(v);
        }
    }
    let lowest = best_values.first().expect("nonempty by precondition");
    let highest = best_values.last().expect("nonempty by precondition");
    Ok((lowest + highest) / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum F1Averaging {
    Macro,
    Micro,
    Weighted,
}

impl std::str::FromStr for F1Averaging {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "macro" => Ok(F1Averaging::Macro),
            "micro" => Ok(F1Averaging::Micro),
            "weighted" => Ok(F1Averaging::Weighted),
            other => Err(format!("unknown F1 averaging {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F1Summary {
    pub mean: f64,
    pub q01: f64,
    pub q99: f64,
    pub samples: Vec<f64>,
}

fn prediction_class(j: &Judgment) -> &str {
    j.matched_label().unwrap_or(NO_ANSWER_CLASS)
}

fn f1_over(
    indices: &[usize],
    pred: &[&str],
    gold: &[&str],
    classes: &[&str],
    averaging: F1Averaging,
) -> f64 {
    match averaging {
        F1Averaging::Micro => {
            // Single-label multiclass: micro F1 reduces to accuracy, but the
            // count form is kept to mirror the definition.
            let mut tp = 0usize;
            let mut fp = 0usize;
            let mut fnn = 0usize;
            for c in classes {
                for &i in indices {
                    match (pred[i] == *c, gold[i] == *c) {
                        (true, true) => tp += 1,
                        (true, false) => fp += 1,
                        (false, true) => fnn += 1,
                        (false, false) => {}
                    }
                }
            }
            if 2 * tp + fp + fnn == 0 {
                0.0
            } else {
                2.0 * tp as f64 / (2 * tp + fp + fnn) as f64
            }
        }
        F1Averaging::Macro | F1Averaging::Weighted => {
            let mut sum = 0.0;
            let mut denom = 0.0;
            for c in classes {
                let mut tp = 0usize;
                let mut fp = 0usize;
                let mut fnn = 0usize;
                for &i in indices {
                    match (pred[i] == *c, gold[i] == *c) {
                        (true, true) => tp += 1,
                        (true, false) => fp += 1,
                        (false, true) => fnn += 1,
                        (false, false) => {}
                    }
                }
                if 2 * tp + fp + fnn == 0 {
                    continue; // class absent from this resample
                }
                let f1 = 2.0 * tp as f64 / (2 * tp + fp + fnn) as f64;
                match averaging {
                    F1Averaging::Macro => {
                        sum += f1;
                        denom += 1.0;
                    }
                    F1Averaging::Weighted => {
                        let support = (tp + fnn) as f64;
                        sum += support * f1;
                        denom += support;
                    }
                    F1Averaging::Micro => unreachable!(),
                }
            }
            if denom == 0.0 {
                0.0
            } else {
                sum / denom
            }
        }
    }
}

/// F1 of predictions against gold labels on the full data, no resampling.
/// Judgments without a matched option fall into the `no-answer` class.
pub fn point_f1(
    predictions: &[Judgment],
    gold: &[String],
    averaging: F1Averaging,
) -> Result<f64, JudgeDataError> {
    let (pred, gold, classes) = prepare_classes(predictions, gold)?;
    let indices: Vec<usize> = (0..pred.len()).collect();
    Ok(f1_over(&indices, &pred, &gold, &classes, averaging))
}

fn prepare_classes<'a>(
    predictions: &'a [Judgment],
    gold: &'a [String],
) -> Result<(Vec<&'a str>, Vec<&'a str>, Vec<&'a str>), JudgeDataError> {
    if predictions.len() != gold.len() {
        return Err(JudgeDataError::LengthMismatch {
            predictions: predictions.len(),
            gold: gold.len(),
        });
    }
    if predictions.is_empty() {
        return Err(JudgeDataError::EmptyInput);
    }
    let pred: Vec<&str> = predictions.iter().map(prediction_class).collect();
    let gold: Vec<&str> = gold.iter().map(String::as_str).collect();
    let mut classes: Vec<&str> = pred.iter().chain(gold.iter()).copied().collect();
    classes.sort_unstable();
    classes.dedup();
    Ok((pred, gold, classes))
}

/// Bootstrap distribution of the F1 score.
///
/// Resampling follows the same stream contract as `bootstrap_ci`: a
/// `ChaCha8Rng` seeded with `seed_from_u64(rng_seed)` draws `n` indices per
/// iteration via `random_range(0..n)`. The class set is fixed from the full
/// data; classes absent from a resample are left out of the macro average.
/// The summary reports the sample mean and the 1st/99th percentiles.
pub fn bootstrap_f1(
    predictions: &[Judgment],
    gold: &[String],
    iterations: u32,
    rng_seed: u64,
    averaging: F1Averaging,
) -> Result<F1Summary, JudgeDataError> {
    let (pred, gold, classes) = prepare_classes(predictions, gold)?;
    let n = pred.len();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut samples = Vec::with_capacity(iterations as usize);
    let mut indices = vec![0usize; n];
    for _ in 0..iterations {
        for slot in indices.iter_mut() {
            *slot = rng.random_range(0..n);
        }
        samples.push(f1_over(&indices, &pred, &gold, &classes, averaging));
    }
    let mut sorted = samples.clone();
    sorted.sort_by(f64::total_cmp);
    Ok(F1Summary {
        mean: samples.iter().sum::<f64>() / samples.len() as f64,
        q01: percentile_linear(&sorted, 1.0)?,
        q99: percentile_linear(&sorted, 99.0)?,
        samples,
    })
}
