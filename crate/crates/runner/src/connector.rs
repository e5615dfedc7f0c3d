//! Connectors turn one run task into one raw response. The mock connector
//! replays a script; the remote one speaks to a chat endpoint through a
//! transport.

use futures::future::BoxFuture;
use futures::FutureExt;
use thiserror::Error;

use proctor_core::config::{MockScript, ModelKind, ModelSpec};
use proctor_core::plan::RunTask;
use proctor_core::prompt::PromptPair;
use proctor_core::record::RawResponse;

use crate::remote::{HttpChatTransport, RemoteConnector};

#[derive(Debug, Error)]
pub enum ConnectorError {
    #[error("model {id}: mock models need a script")]
    MissingScript { id: String },
    #[error("model {id}: remote models need an endpoint")]
    MissingEndpoint { id: String },
    #[error("model {id}: failed to build http client: {message}")]
    Client { id: String, message: String },
}

pub trait Connector: Send + Sync {
    fn generate<'a>(
        &'a self,
        task: &'a RunTask,
        prompt: &'a PromptPair,
    ) -> BoxFuture<'a, RawResponse>;
}

/// Answers from a canned script, instantly and deterministically. Latency
/// and retries are reported as zero so mock runs are byte-reproducible.
pub struct MockConnector {
    script: MockScript,
}

impl MockConnector {
    pub fn new(script: MockScript) -> Self {
        Self { script }
    }

    fn resolve(&self, task: &RunTask, prompt: &PromptPair) -> (String, Option<String>) {
        for rule in &self.script.rules {
            let hit = match (&rule.question_id, &rule.prompt_contains) {
                (Some(id), _) => *id == task.question_id,
                (None, Some(needle)) => prompt.user.contains(needle),
                (None, None) => false,
            };
            if hit {
                if let Some(error) = &rule.error {
                    return (String::new(), Some(error.clone()));
                }
                return (rule.response.clone().unwrap_or_default(), None);
            }
        }
        match &self.script.default_response {
            Some(text) => (text.clone(), None),
            None => (String::new(), Some("no scripted response matched".to_owned())),
        }
    }
}

impl Connector for MockConnector {
    fn generate<'a>(
        &'a self,
        task: &'a RunTask,
        prompt: &'a PromptPair,
    ) -> BoxFuture<'a, RawResponse> {
        let (text, error) = self.resolve(task, prompt);
        async move {
            RawResponse {
                task: task.clone(),
                text,
                latency_ms: 0,
                retry_count: 0,
                endpoint_meta: None,
                error,
            }
        }
        .boxed()
    }
}

/// Builds the connector a model spec asks for. Remote connectors read their
/// API key from the environment variable named by `auth_env`; a missing
/// variable downgrades to anonymous requests with a warning.
pub fn build_connector(spec: &ModelSpec) -> Result<Box<dyn Connector>, ConnectorError> {
    match spec.kind {
        ModelKind::Mock => {
            let script = spec
                .script
                .clone()
                .ok_or_else(|| ConnectorError::MissingScript { id: spec.id.clone() })?;
            Ok(Box::new(MockConnector::new(script)))
        }
        ModelKind::RemoteChat => {
            let endpoint = spec
                .endpoint
                .clone()
                .ok_or_else(|| ConnectorError::MissingEndpoint { id: spec.id.clone() })?;
            let api_key = spec.auth_env.as_deref().and_then(|var| match std::env::var(var) {
                Ok(key) => Some(key),
                Err(_) => {
                    tracing::warn!(model = spec.id, var, "auth variable not set, sending anonymously");
                    None
                }
            });
            let transport =
                HttpChatTransport::new(endpoint, api_key, spec.transport.timeout_ms).map_err(
                    |message| ConnectorError::Client { id: spec.id.clone(), message },
                )?;
            Ok(Box::new(RemoteConnector::new(spec, Box::new(transport))))
        }
    }
}
