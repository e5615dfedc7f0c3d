//! Prompt construction.
//!
//! Templates are plain text with `{name}` placeholders, where a name is one
//! or more of `a-z_`. Anything else after `{` is literal, which lets the
//! templates talk about JSON (`{"answer": "answer option"}`) without any
//! escaping scheme.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::persona::Persona;
use crate::questionnaire::{AnswerOption, QuestionItem, Questionnaire};

/// How much scaffolding the system prompt carries. `json` asks for a strict
/// JSON reply, `friendly` drops the format requirement, `natural` drops the
/// whole instructions block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PromptVariant {
    Json,
    Friendly,
    Natural,
}

impl PromptVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            PromptVariant::Json => "json",
            PromptVariant::Friendly => "friendly",
            PromptVariant::Natural => "natural",
        }
    }
}

impl std::str::FromStr for PromptVariant {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(PromptVariant::Json),
            "friendly" => Ok(PromptVariant::Friendly),
            "natural" => Ok(PromptVariant::Natural),
            _ => Err(PromptError::UnknownVariant { name: s.to_owned() }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptionStyle {
    /// `1. never or seldom, 2., 3. sometimes, ...` on one line.
    InlineComma,
    /// One option per line.
    ItemizedLines,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptPair {
    pub system: String,
    pub user: String,
}

/// The built-in template set, compiled into the binary.
#[derive(Debug, Clone)]
pub struct PromptLibrary {
    pub json_system: String,
    pub friendly_system: String,
    pub natural_system: String,
    pub user: String,
}

impl PromptLibrary {
    pub fn builtin() -> Self {
        Self {
            json_system: include_str!("../data/templates/json_system.txt").to_owned(),
            friendly_system: include_str!("../data/templates/friendly_system.txt").to_owned(),
            natural_system: include_str!("../data/templates/natural_system.txt").to_owned(),
            user: include_str!("../data/templates/user.txt").to_owned(),
        }
    }

    pub fn system_template(&self, variant: PromptVariant) -> &str {
        match variant {
            PromptVariant::Json => &self.json_system,
            PromptVariant::Friendly => &self.friendly_system,
            PromptVariant::Natural => &self.natural_system,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("template references unknown placeholder {{{name}}}")]
    UnknownPlaceholder { name: String },
    #[error("placeholder {{{name}}} would be filled with an empty value")]
    EmptyValue { name: String },
    #[error("unknown prompt variant {name:?}, expected json, friendly or natural")]
    UnknownVariant { name: String },
}

/// Substitutes `{name}` placeholders from `vars`. A `{` not followed by a
/// well-formed placeholder is passed through unchanged; substituted values are
/// not rescanned. Unknown placeholder names and empty values are errors.
pub fn render_template(template: &str, vars: &[(&str, &str)]) -> Result<String, PromptError> {
    let bytes = template.as_bytes();
    let mut out = String::with_capacity(template.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'{' {
            let start = i + 1;
            let mut end = start;
            while end < bytes.len() && (bytes[end].is_ascii_lowercase() || bytes[end] == b'_') {
                end += 1;
            }
            if end > start && end < bytes.len() && bytes[end] == b'}' {
                let name = &template[start..end];
                let value = vars
                    .iter()
                    .find(|(k, _)| *k == name)
                    .map(|(_, v)| *v)
                    .ok_or_else(|| PromptError::UnknownPlaceholder { name: name.to_owned() })?;
                if value.is_empty() {
                    return Err(PromptError::EmptyValue { name: name.to_owned() });
                }
                out.push_str(value);
                i = end + 1;
                continue;
            }
        }
        // Multi-byte chars never start with an ASCII byte, so byte-wise
        // copying below only splits at char boundaries.
        let ch_len = utf8_len(bytes[i]);
        out.push_str(&template[i..i + ch_len]);
        i += ch_len;
    }
    Ok(out)
}

fn utf8_len(first_byte: u8) -> usize {
    match first_byte {
        b if b < 0x80 => 1,
        b if b >> 5 == 0b110 => 2,
        b if b >> 4 == 0b1110 => 3,
        _ => 4,
    }
}

/// Joins option display forms per the requested style.
pub fn format_answer_options(options: &[AnswerOption], style: OptionStyle) -> String {
    let displays: Vec<String> = options.iter().map(AnswerOption::display).collect();
    match style {
        OptionStyle::InlineComma => displays.join(", "),
        OptionStyle::ItemizedLines => displays.join("\n"),
    }
}

/// Builds the system and user prompt for one question put to one persona.
pub fn render_prompt(
    library: &PromptLibrary,
    variant: PromptVariant,
    style: OptionStyle,
    questionnaire: &Questionnaire,
    question: &QuestionItem,
    persona: &Persona,
) -> Result<PromptPair, PromptError> {
    let persona_display = persona.display();
    let system = render_template(
        library.system_template(variant),
        &[("persona", &persona_display), ("instruction", &questionnaire.instruction)],
    )?;
    let options = format_answer_options(questionnaire.effective_options(question), style);
    let user = render_template(
        &library.user,
        &[("question", &question.text), ("options", &options)],
    )?;
    Ok(PromptPair { system, user })
}
