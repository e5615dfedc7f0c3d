//! Drives a run plan against its connectors with bounded concurrency.
//! Results are appended to the sink in plan order regardless of completion
//! order, so identical plans produce byte-identical sink files.

use std::collections::{HashMap, HashSet};

use futures::StreamExt;
use thiserror::Error;

use proctor_core::config::ExperimentConfig;
use proctor_core::persona::PersonaError;
use proctor_core::plan::{RunTask, TaskKey};
use proctor_core::prompt::{render_prompt, PromptError, PromptLibrary, PromptPair};
use proctor_core::record::RawResponse;

use crate::connector::{build_connector, Connector, ConnectorError};
use crate::sink::{RecordSink, SinkError};

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error(transparent)]
    Connector(#[from] ConnectorError),
    #[error(transparent)]
    Sink(#[from] SinkError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Persona(#[from] PersonaError),
    #[error("task references unknown model {id}")]
    UnknownModel { id: String },
    #[error("task references unknown question {id}")]
    UnknownQuestion { id: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunSummary {
    pub attempted: usize,
    pub succeeded: usize,
    pub failed: usize,
    pub wall_clock_ms: u64,
}

/// One connector per configured model, keyed by model id.
pub fn build_connectors(
    config: &ExperimentConfig,
) -> Result<HashMap<String, Box<dyn Connector>>, RunnerError> {
    let mut connectors = HashMap::new();
    for spec in &config.models {
        connectors.insert(spec.id.clone(), build_connector(spec)?);
    }
    Ok(connectors)
}

/// Renders the prompt for every task up front; any failure aborts before a
/// single request is made.
pub fn render_plan_prompts(
    tasks: &[RunTask],
    config: &ExperimentConfig,
) -> Result<Vec<PromptPair>, RunnerError> {
    let library = PromptLibrary::builtin();
    let mut prompts = Vec::with_capacity(tasks.len());
    for task in tasks {
        let question = config
            .questionnaire
            .question(&task.question_id)
            .ok_or_else(|| RunnerError::UnknownQuestion { id: task.question_id.clone() })?;
        prompts.push(render_prompt(
            &library,
            task.prompt_variant,
            config.prompt.option_style,
            &config.questionnaire,
            question,
            &task.persona,
        )?);
    }
    Ok(prompts)
}

/// Runs every task, up to `parallelism` in flight at once, appending each
/// result in plan order. A sink failure aborts the run; generation failures
/// do not, they are recorded with their error and counted.
pub async fn execute_plan(
    tasks: &[RunTask],
    config: &ExperimentConfig,
    connectors: &HashMap<String, Box<dyn Connector>>,
    sink: &mut dyn RecordSink,
    parallelism: usize,
) -> Result<RunSummary, RunnerError> {
    for task in tasks {
        if !connectors.contains_key(&task.model_id) {
            return Err(RunnerError::UnknownModel { id: task.model_id.clone() });
        }
    }
    let prompts = render_plan_prompts(tasks, config)?;

    let started = std::time::Instant::now();
    let mut succeeded = 0usize;
    let mut failed = 0usize;
    {
        let mut results = futures::stream::iter(
            tasks
                .iter()
                .zip(&prompts)
                .map(|(task, prompt)| connectors[&task.model_id].generate(task, prompt)),
        )
        .buffered(parallelism.max(1));
        while let Some(raw) = results.next().await {
            if raw.succeeded() {
                succeeded += 1;
            } else {
                failed += 1;
            }
            sink.append(&raw)?;
        }
    }
    Ok(RunSummary {
        attempted: tasks.len(),
        succeeded,
        failed,
        wall_clock_ms: started.elapsed().as_millis() as u64,
    })
}

/// What is left of a plan once the responses already on disk are honored:
/// every task without a successful record. Failed records are retried.
pub fn resume_plan(plan: &[RunTask], existing: &[RawResponse]) -> Vec<RunTask> {
    let done: HashSet<TaskKey> =
        existing.iter().filter(|r| r.succeeded()).map(|r| r.task.key()).collect();
    plan.iter().filter(|t| !done.contains(&t.key())).cloned().collect()
}
