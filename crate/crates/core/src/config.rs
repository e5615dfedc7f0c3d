//! Experiment configuration: parsing and validation.
//!
//! Parsing and validation are deliberately separate passes. `parse_document`
//! only deserializes (strict about unknown fields, reports the JSON path on
//! type errors); `validate_config` collects every semantic problem instead of
//! stopping at the first; `parse_experiment_config` chains the two.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::persona::{expand_personas, Persona, PersonaError, SurnameGroup};
use crate::prompt::{OptionStyle, PromptVariant};
use crate::questionnaire::Questionnaire;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    /// RNG seeds requested from the model; the plan runs every question once
    /// per seed.
    pub seeds: Vec<u64>,
    #[serde(default = "default_repetitions")]
    pub repetitions: u32,
    pub models: Vec<ModelSpec>,
    #[serde(default)]
    pub prompt: PromptSettings,
    pub personas: PersonaSpec,
    pub questionnaire: Questionnaire,
    #[serde(default)]
    pub judge: JudgeConfig,
    #[serde(default)]
    pub stats: StatConfig,
}

fn default_repetitions() -> u32 {
    1
}

impl ExperimentConfig {
    pub fn model(&self, id: &str) -> Option<&ModelSpec> {
        self.models.iter().find(|m| m.id == id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    /// OpenAI-style chat completion endpoint over HTTP.
    RemoteChat,
    /// Scripted in-process stand-in, used for tests and dry runs.
    Mock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub id: String,
    pub kind: ModelKind,
    /// Base URL for remote-chat models, e.g. `https://api.openai.com/v1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    pub model_name: String,
    /// Name of the environment variable holding the API key. The key itself
    /// never appears in config files.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auth_env: Option<String>,
    #[serde(default)]
    pub params: GenerationParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub script: Option<MockScript>,
    #[serde(default)]
    pub transport: TransportPolicy,
    /// Whether the endpoint accepts a `top_k` field. Most OpenAI-compatible
    /// servers reject it, so it is dropped unless opted in.
    #[serde(default)]
    pub supports_top_k: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationParams {
    pub max_new_tokens: u32,
    pub temperature: f64,
    pub top_k: u32,
    pub top_p: f64,
}

impl Default for GenerationParams {
    fn default() -> Self {
        Self { max_new_tokens: 64, temperature: 1.0, top_k: 50, top_p: 0.95 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransportPolicy {
    pub max_retries: u32,
    pub base_backoff_ms: u64,
    pub timeout_ms: u64,
    /// Upper bound on request rate; unset means no throttling.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub requests_per_second: Option<f64>,
}

impl Default for TransportPolicy {
    fn default() -> Self {
        Self { max_retries: 3, base_backoff_ms: 500, timeout_ms: 120_000, requests_per_second: None }
    }
}

/// Canned responses for a mock model. Rules are checked in order; the first
/// match wins, otherwise `default` answers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockScript {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rules: Vec<MockRule>,
    #[serde(rename = "default", default, skip_serializing_if = "Option::is_none")]
    pub default_response: Option<String>,
}

/// One scripted behavior: exactly one matcher (`question_id` or
/// `prompt_contains`) paired with exactly one outcome (`response` or `error`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockRule {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_contains: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PromptSettings {
    pub variant: PromptVariant,
    pub option_style: OptionStyle,
}

impl Default for PromptSettings {
    fn default() -> Self {
        Self { variant: PromptVariant::Json, option_style: OptionStyle::InlineComma }
    }
}

/// Persona source: either generated as titles x surname groups, or listed
/// explicitly. The two modes are mutually exclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PersonaSpec {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub titles: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub groups: Vec<SurnameGroup>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub explicit: Vec<ExplicitPersona>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitPersona {
    pub title: String,
    pub surname: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub group: String,
}

impl PersonaSpec {
    pub fn expand(&self) -> Result<Vec<Persona>, PersonaError> {
        if self.explicit.is_empty() {
            expand_personas(&self.groups, &self.titles)
        } else {
            self.explicit
                .iter()
                .map(|p| Persona::new(p.title.clone(), p.surname.clone(), p.group.clone()))
                .collect()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntropyUnits {
    Nats,
    Bits,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JudgeConfig {
    /// Judgments whose score entropy exceeds this are discarded as noise.
    pub entropy_threshold: f64,
    pub entropy_units: EntropyUnits,
    /// Endpoint of a fine-tuned judge that returns per-option probabilities.
    /// Unset means only the rule-based judge is available.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probability_provider: Option<ProviderRef>,
}

impl Default for JudgeConfig {
    fn default() -> Self {
        Self {
            entropy_threshold: 0.359,
            entropy_units: EntropyUnits::Nats,
            probability_provider: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderRef {
    pub endpoint: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auth_env: Option<String>,
    #[serde(default)]
    pub transport: TransportPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatConfig {
    pub bootstrap_iterations: u32,
    pub confidence_level: f64,
    pub rng_seed: u64,
}

impl Default for StatConfig {
    fn default() -> Self {
        Self { bootstrap_iterations: 1000, confidence_level: 0.99, rng_seed: 0 }
    }
}

/// One semantic problem found by validation, locating the offending field by
/// JSON-ish path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error at {path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid config:\n{}", .0.iter().map(|v| format!("  {v}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<Violation>),
}

/// Deserializes without semantic checks. Unknown fields are errors; type
/// errors name the JSON path they occurred at.
pub fn parse_document(json: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut de = serde_json::Deserializer::from_str(json);
    serde_path_to_error::deserialize(&mut de)
        .map_err(|e| ConfigError::Parse { path: e.path().to_string(), message: e.inner().to_string() })
}

pub fn parse_experiment_config(json: &str) -> Result<ExperimentConfig, ConfigError> {
    let config = parse_document(json)?;
    let violations = validate_config(&config);
    if violations.is_empty() {
        Ok(config)
    } else {
        Err(ConfigError::Invalid(violations))
    }
}

/// Collects every semantic problem in the config. Empty means valid.
pub fn validate_config(config: &ExperimentConfig) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |path: String, message: String| out.push(Violation { path, message });

    if config.name.trim().is_empty() {
        push("name".into(), "must be non-empty".into());
    }
    if config.seeds.is_empty() {
        push("seeds".into(), "at least one seed is required".into());
    }
    let mut seen_seeds = std::collections::HashSet::new();
    for (i, s) in config.seeds.iter().enumerate() {
        if !seen_seeds.insert(s) {
            push(format!("seeds[{i}]"), format!("duplicate seed {s}"));
        }
    }
    if config.repetitions == 0 {
        push("repetitions".into(), "must be at least 1".into());
    }

    if config.models.is_empty() {
        push("models".into(), "at least one model is required".into());
    }
    let mut seen_models = std::collections::HashSet::new();
    for (i, m) in config.models.iter().enumerate() {
        let at = |field: &str| format!("models[{i}].{field}");
        if m.id.trim().is_empty() {
            push(at("id"), "must be non-empty".into());
        }
        if !seen_models.insert(m.id.clone()) {
            push(at("id"), format!("duplicate model id {:?}", m.id));
        }
        match m.kind {
            ModelKind::RemoteChat => {
                if m.endpoint.as_deref().map_or(true, |e| e.trim().is_empty()) {
                    push(at("endpoint"), "remote-chat models need an endpoint".into());
                }
                if m.script.is_some() {
                    push(at("script"), "scripts only apply to mock models".into());
                }
            }
            ModelKind::Mock => {
                if m.endpoint.is_some() {
                    push(at("endpoint"), "mock models must not set an endpoint".into());
                }
                match &m.script {
                    None => push(at("script"), "mock models need a script".into()),
                    Some(script) => {
                        for (j, rule) in script.rules.iter().enumerate() {
                            let rat = format!("models[{i}].script.rules[{j}]");
                            let matchers =
                                [rule.question_id.is_some(), rule.prompt_contains.is_some()];
                            if matchers.iter().filter(|m| **m).count() != 1 {
                                push(
                                    rat.clone(),
                                    "exactly one of question_id or prompt_contains is required"
                                        .into(),
                                );
                            }
                            let outcomes = [rule.response.is_some(), rule.error.is_some()];
                            if outcomes.iter().filter(|o| **o).count() != 1 {
                                push(rat, "exactly one of response or error is required".into());
                            }
                        }
                        if script.rules.is_empty() && script.default_response.is_none() {
                            push(at("script"), "script has neither rules nor a default".into());
                        }
                    }
                }
            }
        }
        if !(0.0..=2.0).contains(&m.params.temperature) {
            push(at("params.temperature"), "must be within [0, 2]".into());
        }
        if !(0.0..=1.0).contains(&m.params.top_p) {
            push(at("params.top_p"), "must be within [0, 1]".into());
        }
    }

    let p = &config.personas;
    let generated = !p.titles.is_empty() || !p.groups.is_empty();
    let explicit = !p.explicit.is_empty();
    match (generated, explicit) {
        (true, true) => push(
            "personas".into(),
            "titles/groups and explicit are mutually exclusive".into(),
        ),
        (false, false) => push("personas".into(), "no personas defined".into()),
        (true, false) => {
            if p.titles.is_empty() {
                push("personas.titles".into(), "at least one title is required".into());
            }
            if p.groups.is_empty() {
                push("personas.groups".into(), "at least one group is required".into());
            }
            for (i, g) in p.groups.iter().enumerate() {
                if g.surnames.is_empty() {
                    push(format!("personas.groups[{i}].surnames"), "must be non-empty".into());
                }
            }
        }
        (false, true) => {
            for (i, e) in p.explicit.iter().enumerate() {
                if e.title.is_empty() || e.surname.is_empty() {
                    push(
                        format!("personas.explicit[{i}]"),
                        "title and surname must be non-empty".into(),
                    );
                }
            }
        }
    }

    let q = &config.questionnaire;
    if q.questions.is_empty() {
        push("questionnaire.questions".into(), "at least one question is required".into());
    }
    let mut seen_questions = std::collections::HashSet::new();
    for (i, question) in q.questions.iter().enumerate() {
        let at = format!("questionnaire.questions[{i}]");
        if !seen_questions.insert(question.id.clone()) {
            push(at.clone(), format!("duplicate question id {:?}", question.id));
        }
        if q.effective_options(question).is_empty() {
            push(at, format!("question {:?} has no options", question.id));
        }
    }
    let mut seen_scales = std::collections::HashSet::new();
    for (i, scale) in q.scales.iter().enumerate() {
        let at = |field: &str| format!("questionnaire.scales[{i}].{field}");
        if !seen_scales.insert(scale.name.clone()) {
            push(at("name"), format!("duplicate scale name {:?}", scale.name));
        }
        let (lo, hi) = scale.score_range;
        if lo > hi {
            push(at("score_range"), format!("min {lo} exceeds max {hi}"));
        }
        for (j, item) in scale.items.iter().enumerate() {
            let iat = format!("questionnaire.scales[{i}].items[{j}]");
            match q.options_for(&item.question) {
                None => push(
                    iat,
                    format!("references unknown question {:?}", item.question),
                ),
                Some(options) => {
                    for option in options {
                        if option.effective_value().is_err() {
                            push(
                                iat.clone(),
                                format!(
                                    "question {:?} option {:?} has no numeric value, cannot score",
                                    item.question, option.label
                                ),
                            );
                        }
                    }
                }
            }
        }
    }

    if config.judge.entropy_threshold < 0.0 {
        push("judge.entropy_threshold".into(), "must be non-negative".into());
    }
    if config.stats.bootstrap_iterations == 0 {
        push("stats.bootstrap_iterations".into(), "must be at least 1".into());
    }
    if !(0.0 < config.stats.confidence_level && config.stats.confidence_level < 1.0) {
        push("stats.confidence_level".into(), "must be strictly between 0 and 1".into());
    }

    out
}
