//! Chat-completion gateway: one abstraction over remote OpenAI-compatible
//! endpoints and deterministic scripted mocks.
//!
//! All agents speak through [`ChatBackend`]; a backend is selected per agent
//! role via [`BackendSpec`], so a fine-tuned model, a baseline model, and a
//! hosted model differ only in configuration. Generation settings default to
//! `temperature = 0.1` and `max_new_tokens = 1000`.

use std::collections::{BTreeMap, VecDeque};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Environment variable holding the bearer token for remote backends.
pub const API_KEY_ENV: &str = "BIOAGENTS_API_KEY";

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("backend unreachable after {attempts} attempts: {last}")]
    Unreachable { attempts: usize, last: String },
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("malformed completion response: {0}")]
    BadResponse(String),
    #[error("scripted backend exhausted after {0} replies")]
    ScriptExhausted(usize),
    #[error("invalid message list: {0}")]
    InvalidMessages(String),
}

/// Message role in a chat conversation.
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
        Self { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self { role: Role::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self { role: Role::Assistant, content: content.into() }
    }
}

/// Generation settings carried on every completion request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub temperature: f64,
    pub max_new_tokens: u32,
    pub model: String,
    pub stop: Option<Vec<String>>,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            temperature: 0.1,
            max_new_tokens: 1000,
            model: "phi-3-mini".to_string(),
            stop: None,
        }
    }
}

/// Declarative backend selection, as it appears in configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendSpec {
    Remote {
        base_url: String,
        #[serde(default = "default_timeout_ms")]
        timeout_ms: u64,
        #[serde(default = "default_retries")]
        retries: usize,
    },
    /// Ordered reply queue; each call consumes one entry.
    ScriptedQueue { replies: Vec<String> },
    /// Exact-prompt lookup on the last user message, with optional fallback.
    ScriptedTable {
        entries: BTreeMap<String, String>,
        #[serde(default)]
        fallback: Option<String>,
    },
}

fn default_timeout_ms() -> u64 {
    30_000
}

fn default_retries() -> usize {
    2
}

impl BackendSpec {
    pub fn build(&self) -> Arc<dyn ChatBackend> {
        match self {
            BackendSpec::Remote { base_url, timeout_ms, retries } => Arc::new(
                RemoteBackend::new(base_url)
                    .with_timeout(Duration::from_millis(*timeout_ms))
                    .with_retries(*retries),
            ),
            BackendSpec::ScriptedQueue { replies } => {
                Arc::new(ScriptedBackend::queue(replies.clone()))
            }
            BackendSpec::ScriptedTable { entries, fallback } => {
                Arc::new(ScriptedBackend::table(entries.clone(), fallback.clone()))
            }
        }
    }
}

/// A chat-completion backend. Implementations are stateless handles safe for
/// concurrent calls.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, messages: &[ChatMessage], config: &GenConfig)
        -> Result<String, GatewayError>;
}

/// Rejects empty contents and conversations that open with an assistant turn.
pub fn validate_messages(messages: &[ChatMessage]) -> Result<(), GatewayError> {
    if messages.is_empty() {
        return Err(GatewayError::InvalidMessages("empty message list".into()));
    }
    if messages[0].role == Role::Assistant {
        return Err(GatewayError::InvalidMessages(
            "conversation must start with system or user".into(),
        ));
    }
    if let Some(i) = messages.iter().position(|m| m.content.trim().is_empty()) {
        return Err(GatewayError::InvalidMessages(format!("message {i} has empty content")));
    }
    Ok(())
}

/// Upper-bound token estimate: `ceil(whitespace_tokens * 1.3)`, computed in
/// integer arithmetic so the result is exact.
pub fn approx_token_count(text: &str) -> usize {
    let words = text.split_whitespace().count();
    (words * 13).div_ceil(10)
}

// --- wire types (OpenAI-compatible chat completions) ---

#[derive(Debug, Serialize)]
struct CompletionRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
    max_tokens: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    stop: Option<&'a [String]>,
}

#[derive(Debug, Deserialize)]
struct CompletionResponse {
    choices: Vec<Choice>,
}

#[derive(Debug, Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Debug, Deserialize)]
struct ChoiceMessage {
    content: String,
}

/// Client for `POST {base_url}/v1/chat/completions`.
///
/// Transport failures are retried up to `retries` times with exponential
/// backoff; HTTP error statuses are surfaced with their body and not retried.
pub struct RemoteBackend {
    base_url: String,
    api_key: Option<String>,
    timeout: Duration,
    retries: usize,
    backoff: Duration,
    attempts: AtomicUsize,
}

impl RemoteBackend {
    pub fn new(base_url: impl Into<String>) -> Self {
        let base_url = base_url.into().trim_end_matches('/').to_string();
        Self {
            base_url,
            api_key: std::env::var(API_KEY_ENV).ok(),
            timeout: Duration::from_millis(default_timeout_ms()),
            retries: default_retries(),
            backoff: Duration::from_millis(500),
            attempts: AtomicUsize::new(0),
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn with_retries(mut self, retries: usize) -> Self {
        self.retries = retries;
        self
    }

    pub fn with_backoff(mut self, backoff: Duration) -> Self {
        self.backoff = backoff;
        self
    }

    pub fn with_api_key(mut self, key: impl Into<String>) -> Self {
        self.api_key = Some(key.into());
        self
    }

    /// Total HTTP attempts made by this handle, across all calls.
    pub fn attempts(&self) -> usize {
        self.attempts.load(Ordering::SeqCst)
    }
}

impl ChatBackend for RemoteBackend {
    fn complete(
        &self,
        messages: &[ChatMessage],
        config: &GenConfig,
    ) -> Result<String, GatewayError> {
        validate_messages(messages)?;
        let body = CompletionRequest {
            model: &config.model,
            messages,
            temperature: config.temperature,
            max_tokens: config.max_new_tokens,
            stop: config.stop.as_deref(),
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(self.timeout)
            .build()
            .map_err(|e| GatewayError::Unreachable { attempts: 0, last: e.to_string() })?;
        let url = format!("{}/v1/chat/completions", self.base_url);

        let mut last_err = String::new();
        for attempt in 0..=self.retries {
            self.attempts.fetch_add(1, Ordering::SeqCst);
            let mut req = client.post(&url).json(&body);
            if let Some(key) = &self.api_key {
                req = req.bearer_auth(key);
            }
            match req.send() {
                Ok(resp) => {
                    let status = resp.status();
                    let text = resp.text().unwrap_or_default();
                    if !status.is_success() {
                        return Err(GatewayError::Http { status: status.as_u16(), body: text });
                    }
                    let parsed: CompletionResponse = serde_json::from_str(&text)
                        .map_err(|e| GatewayError::BadResponse(e.to_string()))?;
                    return parsed
                        .choices
                        .into_iter()
                        .next()
                        .map(|c| c.message.content)
                        .ok_or_else(|| GatewayError::BadResponse("no choices".into()));
                }
                Err(e) => {
                    last_err = e.to_string();
                    if attempt < self.retries {
                        std::thread::sleep(self.backoff * 2u32.pow(attempt as u32));
                    }
                }
            }
        }
        Err(GatewayError::Unreachable { attempts: self.retries + 1, last: last_err })
    }
}

enum Script {
    Queue(VecDeque<String>),
    Table { entries: BTreeMap<String, String>, fallback: Option<String> },
    /// Reply derived from the first rule whose needle appears in the prompt.
    Keyword { rules: Vec<(String, String)>, fallback: String },
    /// Replies with the full prompt text (roles prefixed), for
    /// prompt-construction tests.
    Echo,
}

/// Deterministic scripted backend. Captures every request it receives so
/// tests can assert on prompt construction and call counts.
pub struct ScriptedBackend {
    script: Mutex<Script>,
    total: usize,
    calls: AtomicUsize,
    requests: Mutex<Vec<Vec<ChatMessage>>>,
}

impl ScriptedBackend {
    fn with_script(script: Script, total: usize) -> Self {
        Self {
            script: Mutex::new(script),
            total,
            calls: AtomicUsize::new(0),
            requests: Mutex::new(Vec::new()),
        }
    }

    pub fn queue(replies: impl IntoIterator<Item = impl Into<String>>) -> Self {
        let q: VecDeque<String> = replies.into_iter().map(Into::into).collect();
        let total = q.len();
        Self::with_script(Script::Queue(q), total)
    }

    pub fn table(entries: BTreeMap<String, String>, fallback: Option<String>) -> Self {
        Self::with_script(Script::Table { entries, fallback }, 0)
    }

    /// Always replies with the same text.
    pub fn constant(reply: impl Into<String>) -> Self {
        Self::with_script(
            Script::Table { entries: BTreeMap::new(), fallback: Some(reply.into()) },
            0,
        )
    }

    /// First rule whose needle is contained in the concatenated prompt wins.
    pub fn keyword(
        rules: impl IntoIterator<Item = (impl Into<String>, impl Into<String>)>,
        fallback: impl Into<String>,
    ) -> Self {
        let rules = rules.into_iter().map(|(k, v)| (k.into(), v.into())).collect();
        Self::with_script(Script::Keyword { rules, fallback: fallback.into() }, 0)
    }

    pub fn echo() -> Self {
        Self::with_script(Script::Echo, 0)
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    /// Every message list this backend has received, in call order.
    pub fn requests(&self) -> Vec<Vec<ChatMessage>> {
        self.requests.lock().unwrap().clone()
    }
}

fn last_user_content(messages: &[ChatMessage]) -> &str {
    messages
        .iter()
        .rev()
        .find(|m| m.role == Role::User)
        .map(|m| m.content.as_str())
        .unwrap_or_default()
}

impl ChatBackend for ScriptedBackend {
    fn complete(
        &self,
        messages: &[ChatMessage],
        _config: &GenConfig,
    ) -> Result<String, GatewayError> {
        validate_messages(messages)?;
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.requests.lock().unwrap().push(messages.to_vec());
        let mut script = self.script.lock().unwrap();
        match &mut *script {
            Script::Queue(q) => q.pop_front().ok_or(GatewayError::ScriptExhausted(self.total)),
            Script::Table { entries, fallback } => {
                let key = last_user_content(messages);
                entries
                    .get(key)
                    .cloned()
                    .or_else(|| fallback.clone())
                    .ok_or_else(|| GatewayError::ScriptExhausted(entries.len()))
            }
            Script::Keyword { rules, fallback } => {
                let prompt: String = messages
                    .iter()
                    .map(|m| m.content.as_str())
                    .collect::<Vec<_>>()
                    .join("\n");
                Ok(rules
                    .iter()
                    .find(|(needle, _)| prompt.contains(needle.as_str()))
                    .map(|(_, reply)| reply.clone())
                    .unwrap_or_else(|| fallback.clone()))
            }
            Script::Echo => Ok(messages
                .iter()
                .map(|m| {
                    let role = match m.role {
                        Role::System => "system",
                        Role::User => "user",
                        Role::Assistant => "assistant",
                    };
                    format!("{role}: {}", m.content)
                })
                .collect::<Vec<_>>()
                .join("\n")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn token_count_examples() {
        assert_eq!(approx_token_count(""), 0);
        assert_eq!(approx_token_count("a b c"), 4); // ceil(3 * 1.3)
        assert_eq!(approx_token_count(&vec!["w"; 10].join(" ")), 13); // exactly 13.0
    }

    #[test]
    fn token_count_monotone_under_concatenation() {
        let cases = [("alpha beta", "gamma"), ("", "x y z"), ("one", "two three four")];
        for (x, y) in cases {
            let joined = format!("{x} {y}");
            let c = approx_token_count(&joined);
            assert!(c >= approx_token_count(x).max(approx_token_count(y)));
        }
    }

    #[test]
    fn queue_exhaustion_is_an_error() {
        let mock = ScriptedBackend::queue(["A"]);
        let msgs = [ChatMessage::user("hi")];
        assert_eq!(mock.complete(&msgs, &GenConfig::default()).unwrap(), "A");
        let err = mock.complete(&msgs, &GenConfig::default()).unwrap_err();
        assert!(matches!(err, GatewayError::ScriptExhausted(1)));
    }

    #[test]
    fn table_mock_is_deterministic() {
        let entries: BTreeMap<String, String> =
            [("q1".to_string(), "r1".to_string())].into_iter().collect();
        let mock = ScriptedBackend::table(entries, None);
        let msgs = [ChatMessage::user("q1")];
        let a = mock.complete(&msgs, &GenConfig::default()).unwrap();
        let b = mock.complete(&msgs, &GenConfig::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(mock.calls(), 2);
    }

    #[test]
    fn messages_must_start_with_system_or_user() {
        let err = validate_messages(&[ChatMessage::assistant("hi")]).unwrap_err();
        assert!(matches!(err, GatewayError::InvalidMessages(_)));
        assert!(validate_messages(&[ChatMessage::system("s"), ChatMessage::user("u")]).is_ok());
    }

    #[test]
    fn empty_content_rejected() {
        let err = validate_messages(&[ChatMessage::user("  ")]).unwrap_err();
        assert!(matches!(err, GatewayError::InvalidMessages(_)));
    }

    #[test]
    fn remote_retry_bound_and_attempt_counter() {
        // Nothing listens on this port; every attempt is a transport error.
        let backend = RemoteBackend::new("http://127.0.0.1:9")
            .with_retries(2)
            .with_timeout(Duration::from_millis(200))
            .with_backoff(Duration::from_millis(1));
        let err = backend
            .complete(&[ChatMessage::user("hi")], &GenConfig::default())
            .unwrap_err();
        assert!(matches!(err, GatewayError::Unreachable { attempts: 3, .. }));
        assert_eq!(backend.attempts(), 3);
    }

    #[test]
    fn backend_spec_builds_scripted_queue() {
        let spec = BackendSpec::ScriptedQueue { replies: vec!["x".into()] };
        let backend = spec.build();
        let out = backend.complete(&[ChatMessage::user("?")], &GenConfig::default()).unwrap();
        assert_eq!(out, "x");
    }
}
