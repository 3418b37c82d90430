use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CallKind {
    Planner,
    Formalizer,
    Header,
    Fact,
    Generator,
}

impl CallKind {
    /// The tag the answer is expected inside.
    pub fn tag(self) -> &'static str {
        match self {
            CallKind::Planner => "plan",
            CallKind::Formalizer => "problem_file",
            CallKind::Header => "header",
            CallKind::Fact => "fact",
            CallKind::Generator => "generator",
        }
    }
}

/// Harness-side bookkeeping attached to a request. Never sent to a remote model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallMeta {
    pub kind: CallKind,
    pub instance_id: String,
    pub n: usize,
    /// Index of the clause for fact calls.
    pub clause: Option<usize>,
    /// Zero-based retry counter.
    pub attempt: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub temperature: Option<f64>,
    pub max_tokens: Option<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompletionRequest {
    pub system: String,
    pub user: String,
    pub params: GenerationParams,
    pub meta: CallMeta,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub prompt_tokens: Option<u64>,
    pub completion_tokens: Option<u64>,
}

impl Completion {
    pub fn text(text: impl Into<String>) -> Self {
        Completion { text: text.into(), ..Completion::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendError {
    #[error("request timed out")]
    Timeout,
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("transport error: {message}")]
    Transport { message: String },
    #[error("malformed response: {message}")]
    Protocol { message: String },
    #[error("environment variable `{var}` is not set")]
    MissingKey { var: String },
    #[error("gave up after {attempts} attempts: {last}")]
    Exhausted { attempts: usize, last: Box<BackendError> },
    #[error("{message}")]
    Other { message: String },
}

impl BackendError {
    /// Whether a retry could plausibly succeed.
    pub fn is_transient(&self) -> bool {
        match self {
            BackendError::Timeout | BackendError::Transport { .. } => true,
            BackendError::Http { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

/// A text-generation service.
pub trait Backend: Send + Sync {
    /// Short identifier recorded with every result.
    fn id(&self) -> String;
    fn complete(&self, request: &CompletionRequest) -> Result<Completion, BackendError>;
}

impl<B: Backend + ?Sized> Backend for Arc<B> {
    fn id(&self) -> String {
        (**self).id()
    }

    fn complete(&self, request: &CompletionRequest) -> Result<Completion, BackendError> {
        (**self).complete(request)
    }
}

type Script = dyn Fn(&CompletionRequest) -> Result<Completion, BackendError> + Send + Sync;

/// A deterministic backend driven by a rule from request to response.
pub struct ScriptedBackend {
    id: String,
    rule: Box<Script>,
}

impl ScriptedBackend {
    pub fn new<F>(id: impl Into<String>, rule: F) -> Self
    where
        F: Fn(&CompletionRequest) -> Result<Completion, BackendError> + Send + Sync + 'static,
    {
        ScriptedBackend { id: id.into(), rule: Box::new(rule) }
    }

    /// Always answers `text`.
    pub fn constant(id: impl Into<String>, text: impl Into<String>) -> Self {
        let text = text.into();
        ScriptedBackend::new(id, move |_| Ok(Completion::text(text.clone())))
    }
}

impl fmt::Debug for ScriptedBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScriptedBackend").field("id", &self.id).finish_non_exhaustive()
    }
}

impl Backend for ScriptedBackend {
    fn id(&self) -> String {
        self.id.clone()
    }

    fn complete(&self, request: &CompletionRequest) -> Result<Completion, BackendError> {
        (self.rule)(request)
    }
}
