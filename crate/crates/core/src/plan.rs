//! Run planning: the full cross product of models, personas, questions,
//! seeds and repetitions, in a fixed deterministic order.

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::persona::{Persona, PersonaError};
use crate::prompt::PromptVariant;

/// One generation to perform. Records embed these fields, so every line in a
/// sink identifies itself without context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTask {
    pub model_id: String,
    pub persona: Persona,
    pub question_id: String,
    pub seed: u64,
    pub repetition_index: u32,
    pub prompt_variant: PromptVariant,
}

/// Identity of a task for resume bookkeeping; two runs of the same plan agree
/// on these keys.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TaskKey {
    pub model_id: String,
    pub title: String,
    pub surname: String,
    pub question_id: String,
    pub seed: u64,
    pub repetition_index: u32,
}

impl RunTask {
    pub fn key(&self) -> TaskKey {
        TaskKey {
            model_id: self.model_id.clone(),
            title: self.persona.title.clone(),
            surname: self.persona.surname.clone(),
            question_id: self.question_id.clone(),
            seed: self.seed,
            repetition_index: self.repetition_index,
        }
    }
}

/// Enumerates every task in the canonical order: models, then personas, then
/// questions, then seeds, then repetitions, each in declaration order.
pub fn enumerate_run_plan(config: &ExperimentConfig) -> Result<Vec<RunTask>, PersonaError> {
    let personas = config.personas.expand()?;
    let mut tasks = Vec::with_capacity(
        config.models.len()
            * personas.len()
            * config.questionnaire.questions.len()
            * config.seeds.len()
            * config.repetitions as usize,
    );
    for model in &config.models {
        for persona in &personas {
            for question in &config.questionnaire.questions {
                for &seed in &config.seeds {
                    for repetition_index in 0..config.repetitions {
                        tasks.push(RunTask {
                            model_id: model.id.clone(),
                            persona: persona.clone(),
                            question_id: question.id.clone(),
                            seed,
                            repetition_index,
                            prompt_variant: config.prompt.variant,
                        });
                    }
                }
            }
        }
    }
    Ok(tasks)
}
