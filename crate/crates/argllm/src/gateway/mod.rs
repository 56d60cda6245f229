//! Access to the language model.
//!
//! A [`Gateway`] wraps a [`ChatBackend`] (an OpenAI-compatible HTTP endpoint
//! or the deterministic [`MockBackend`]) and implements the three prompt
//! protocols used by the rest of the crate: base-score elicitation, argument
//! generation and chat-contribution classification.

mod http;
mod mock;
pub mod parse;
pub mod prompts;

use std::fmt;
use std::sync::Arc;
use std::time::Duration;

use argllm_core::{ArgumentId, Polarity, Qbaf, StrengthMap, MAX_DEPTH, MAX_TEXT_CHARS};
use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;

pub use http::HttpBackend;
pub use mock::{MockBackend, ScriptRule};
use prompts::Template;

/// Environment variable consulted when the configured API key is empty.
pub const API_KEY_ENV: &str = "LLM_API_KEY";

/// Score used when the model's confidence cannot be parsed.
pub const FALLBACK_SCORE: f64 = 0.5;

const REDACTED: &str = "***";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Http,
    Mock,
}

#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub endpoint_url: String,
    pub model: String,
    pub api_key: String,
    pub temperature: f64,
    pub timeout_ms: u64,
    pub mock_seed: u64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub mock_script: Vec<ScriptRule>,
    pub max_concurrency: usize,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            kind: BackendKind::Http,
            endpoint_url: "https://api.openai.com/v1".into(),
            model: "gpt-4o-mini".into(),
            api_key: String::new(),
            temperature: 0.0,
            timeout_ms: 60_000,
            mock_seed: 0,
            mock_script: Vec::new(),
            max_concurrency: 4,
        }
    }
}

impl fmt::Debug for BackendConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BackendConfig")
            .field("kind", &self.kind)
            .field("endpoint_url", &self.endpoint_url)
            .field("model", &self.model)
            .field("api_key", &if self.api_key.is_empty() { "" } else { REDACTED })
            .field("temperature", &self.temperature)
            .field("timeout_ms", &self.timeout_ms)
            .field("mock_seed", &self.mock_seed)
            .field("mock_script", &self.mock_script.len())
            .field("max_concurrency", &self.max_concurrency)
            .finish()
    }
}

impl BackendConfig {
    pub fn mock(seed: u64) -> Self {
        BackendConfig { kind: BackendKind::Mock, mock_seed: seed, ..Default::default() }
    }

    pub fn with_script(mut self, rules: Vec<ScriptRule>) -> Self {
        self.mock_script = rules;
        self
    }

    /// Copy safe to show to clients: a non-empty key becomes `***`.
    pub fn redacted(&self) -> Self {
        let mut copy = self.clone();
        if !copy.api_key.is_empty() {
            copy.api_key = REDACTED.into();
        }
        copy
    }

    /// The configured key, or [`API_KEY_ENV`] when the config holds none.
    pub fn resolved_api_key(&self) -> String {
        if self.api_key.is_empty() {
            std::env::var(API_KEY_ENV).unwrap_or_default()
        } else {
            self.api_key.clone()
        }
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_millis(self.timeout_ms)
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        let bad = |m: &str| Err(GatewayError::Config(m.to_owned()));
        if !(self.temperature >= 0.0) {
            return bad("temperature must be non-negative");
        }
        if self.max_concurrency == 0 {
            return bad("max_concurrency must be at least 1");
        }
        if self.kind == BackendKind::Http {
            if self.endpoint_url.trim().is_empty() {
                return bad("the http backend needs an endpoint_url");
            }
            if self.model.trim().is_empty() {
                return bad("the http backend needs a model");
            }
            if self.resolved_api_key().trim().is_empty() {
                return bad("the http backend needs an api_key (or LLM_API_KEY)");
            }
            if self.timeout_ms == 0 {
                return bad("timeout_ms must be positive");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::Assistant, content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GatewayError {
    #[error("network failure: {0}")]
    Network(String),
    #[error("the endpoint rejected the credentials (HTTP {status})")]
    Auth { status: u16 },
    #[error("rate limited{}", retry_after_secs.map(|s| format!(", retry after {s}s")).unwrap_or_default())]
    RateLimited { retry_after_secs: Option<u64> },
    #[error("unexpected HTTP status {status}")]
    Status { status: u16 },
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("request timed out")]
    Timeout,
    #[error("invalid backend configuration: {0}")]
    Config(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("expected a numbered list of {expected} distinct items")]
    MalformedList { expected: usize },
}

impl GatewayError {
    pub fn code(&self) -> &'static str {
        match self {
            GatewayError::Network(_) => "network-failure",
            GatewayError::Auth { .. } => "auth-failure",
            GatewayError::RateLimited { .. } => "rate-limited",
            GatewayError::Status { .. } => "backend-status",
            GatewayError::MalformedResponse(_) => "malformed-response",
            GatewayError::Timeout => "timeout",
            GatewayError::Config(_) => "invalid-backend-config",
            GatewayError::InvalidRequest(_) => "invalid-request",
            GatewayError::MalformedList { .. } => "malformed-list",
        }
    }
}

/// One chat-completion round trip.
#[async_trait]
pub trait ChatBackend: Send + Sync {
    async fn complete(&self, messages: &[ChatMessage]) -> Result<String, GatewayError>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElicitedScore {
    pub value: f64,
    /// The reply never parsed and [`FALLBACK_SCORE`] was used.
    pub defaulted: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatContribution {
    pub target: ArgumentId,
    pub polarity: Polarity,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SkippedContribution {
    pub target: String,
    pub reason: &'static str,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatOutcome {
    pub reply: String,
    pub contributions: Vec<ChatContribution>,
    pub skipped: Vec<SkippedContribution>,
}

const SYSTEM_PROMPT: &str = "You help people weigh evidence for and against claims. Follow the requested answer format exactly.";

/// Shareable handle on a backend with an outbound concurrency cap.
#[derive(Clone)]
pub struct Gateway {
    backend: Arc<dyn ChatBackend>,
    permits: Arc<Semaphore>,
}

impl fmt::Debug for Gateway {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Gateway").field("available_permits", &self.permits.available_permits()).finish()
    }
}

impl Gateway {
    pub fn from_config(config: &BackendConfig) -> Result<Self, GatewayError> {
        config.validate()?;
        let backend: Arc<dyn ChatBackend> = match config.kind {
            BackendKind::Http => Arc::new(HttpBackend::new(config)?),
            BackendKind::Mock => Arc::new(MockBackend::new(config.mock_seed, config.mock_script.clone())),
        };
        Ok(Gateway::with_backend(backend, config.max_concurrency))
    }

    pub fn with_backend(backend: Arc<dyn ChatBackend>, max_concurrency: usize) -> Self {
        Gateway { backend, permits: Arc::new(Semaphore::new(max_concurrency.max(1))) }
    }

    pub async fn complete(&self, messages: &[ChatMessage]) -> Result<String, GatewayError> {
        if messages.is_empty() {
            return Err(GatewayError::InvalidRequest("no messages".into()));
        }
        if messages.iter().any(|m| m.role != Role::Assistant && m.content.trim().is_empty()) {
            return Err(GatewayError::InvalidRequest("system and user messages need content".into()));
        }
        let _permit = self.permits.acquire().await.expect("the semaphore is never closed");
        self.backend.complete(messages).await
    }

    async fn ask(&self, prompt: String) -> Result<String, GatewayError> {
        self.complete(&[ChatMessage::system(SYSTEM_PROMPT), ChatMessage::user(prompt)]).await
    }

    /// Asks the model directly how confident it is that `statement` holds.
    /// `parent` is the text of the argument `statement` responds to, if any.
    pub async fn elicit_base_score(
        &self,
        statement: &str,
        parent: Option<&str>,
        context: Option<&str>,
    ) -> Result<ElicitedScore, GatewayError> {
        if statement.trim().is_empty() {
            return Err(GatewayError::InvalidRequest("empty statement".into()));
        }
        let prompt = Template::ElicitScore.render(&[
            ("statement", statement),
            ("parent", &prompts::parent_line(parent)),
            ("context", &prompts::context_block(context)),
        ]);
        if let Some(value) = parse::parse_score(&self.ask(prompt).await?) {
            return Ok(ElicitedScore { value, defaulted: false });
        }
        let strict = Template::ElicitScoreStrict.render(&[("statement", statement)]);
        Ok(match parse::parse_score(&self.ask(strict).await?) {
            Some(value) => ElicitedScore { value, defaulted: false },
            None => {
                tracing::warn!("confidence reply unparseable twice; using fallback score");
                ElicitedScore { value: FALLBACK_SCORE, defaulted: true }
            }
        })
    }

    /// Asks for exactly `count` distinct arguments attacking or supporting
    /// `target_text`.
    pub async fn generate_arguments(
        &self,
        target_text: &str,
        polarity: Polarity,
        count: usize,
        context: Option<&str>,
    ) -> Result<Vec<String>, GatewayError> {
        if !(1..=4).contains(&count) {
            return Err(GatewayError::InvalidRequest(format!("count must be 1-4, got {count}")));
        }
        let direction = match polarity {
            Polarity::Attack => "against",
            Polarity::Support => "in favour of",
        };
        let count_str = count.to_string();
        let prompt = Template::GenerateArgs.render(&[
            ("statement", target_text),
            ("polarity", direction),
            ("count", &count_str),
            ("context", &prompts::context_block(context)),
        ]);
        let first = self.ask(prompt.clone()).await?;
        if let Some(items) = parse::parse_numbered_list(&first, count, MAX_TEXT_CHARS) {
            return Ok(items);
        }
        let strict = Template::GenerateArgsStrict.render(&[
            ("statement", target_text),
            ("polarity", direction),
            ("count", &count_str),
        ]);
        let messages = [
            ChatMessage::system(SYSTEM_PROMPT),
            ChatMessage::user(prompt),
            ChatMessage::assistant(first),
            ChatMessage::user(strict),
        ];
        let second = self.complete(&messages).await?;
        parse::parse_numbered_list(&second, count, MAX_TEXT_CHARS).ok_or(GatewayError::MalformedList { expected: count })
    }

    /// Reads a chat message against the current tree and extracts any new
    /// evidence as attackers or supporters of existing arguments.
    ///
    /// Contributions naming unknown arguments, or arguments at the depth
    /// limit, are dropped and listed in [`ChatOutcome::skipped`].
    pub async fn classify_chat_contribution(
        &self,
        qbaf: &Qbaf,
        strengths: &StrengthMap,
        message: &str,
    ) -> Result<ChatOutcome, GatewayError> {
        if message.trim().is_empty() {
            return Err(GatewayError::InvalidRequest("empty message".into()));
        }
        let prompt = Template::ChatClassify.render(&[("qbaf", &describe_tree(qbaf, strengths)), ("message", message)]);
        let raw = self.ask(prompt).await?;
        let (mut reply, candidates) = parse::parse_chat_reply(&raw);

        let mut contributions = Vec::new();
        let mut skipped = Vec::new();
        for c in candidates {
            let target = ArgumentId::new(c.target.as_str()).ok().filter(|id| qbaf.contains(id));
            let Some(target) = target else {
                skipped.push(SkippedContribution { target: c.target, reason: "unknown-target" });
                continue;
            };
            let Ok(polarity) = c.polarity.parse::<Polarity>() else {
                skipped.push(SkippedContribution { target: c.target, reason: "unknown-polarity" });
                continue;
            };
            if c.text.is_empty() || c.text.chars().count() > MAX_TEXT_CHARS {
                skipped.push(SkippedContribution { target: c.target, reason: "invalid-text" });
                continue;
            }
            if qbaf.depth_of(&target).map_or(true, |d| d >= MAX_DEPTH) {
                skipped.push(SkippedContribution { target: c.target, reason: "depth-limit" });
                continue;
            }
            contributions.push(ChatContribution { target, polarity, text: c.text });
        }
        if skipped.iter().any(|s| s.reason == "depth-limit") {
            if !reply.is_empty() {
                reply.push(' ');
            }
            reply.push_str("(Points about arguments at the depth limit were not added to the tree.)");
        }
        if reply.is_empty() {
            reply = "Noted.".into();
        }
        Ok(ChatOutcome { reply, contributions, skipped })
    }
}

/// One line per argument, root first, in the format the classification
/// prompt describes.
pub fn describe_tree(qbaf: &Qbaf, strengths: &StrengthMap) -> String {
    let mut ids: Vec<(usize, &ArgumentId)> =
        qbaf.arguments().map(|a| (qbaf.depth_of(a.id()).unwrap_or(0), a.id())).collect();
    ids.sort();
    ids.iter()
        .filter_map(|(depth, id)| {
            let arg = qbaf.get(id)?;
            let relation = match qbaf.parent_of(id) {
                Some((parent, Polarity::Attack)) => format!("attacks {parent}"),
                Some((parent, Polarity::Support)) => format!("supports {parent}"),
                None => "claim".to_owned(),
            };
            let strength = strengths.get(id).unwrap_or(arg.base_score());
            Some(format!("{id} (depth {depth}, {relation}, strength {strength:.2}): {}", arg.text()))
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// One request through a freshly built gateway.
pub async fn complete(config: &BackendConfig, messages: &[ChatMessage]) -> Result<String, GatewayError> {
    Gateway::from_config(config)?.complete(messages).await
}
