//! Chat-completion gateway: one interface over a live OpenAI-compatible
//! endpoint and a deterministic replay store.
//!
//! Every agent request is a [`ChatRequest`] rendered from a named
//! [`PromptTemplate`]. Requests have a stable [digest](request_digest)
//! over (template name, rendered text, decode parameters) — never over
//! timing — so a live session recorded with the `record` backend can be
//! replayed later as a fixture, byte for byte. The four backends:
//!
//! * [`backend::HttpBackend`] — live `POST /chat/completions`;
//! * [`backend::ReplayBackend`] — answers from digest-named JSON files;
//! * [`backend::RecordBackend`] — wraps another backend and writes the
//!   transcript it produces;
//! * [`backend::ScriptedBackend`] — in-memory digest→text map for tests.
//!
//! Decoding defaults are pinned to greedy (`temperature=0`, sampling
//! off) so reruns of a live model are as repeatable as the model allows.

pub mod backend;
pub mod prompts;
mod template;

pub use backend::{
    ChatBackend, FnBackend, HttpBackend, RecordBackend, ReplayBackend, ReplayStore,
    ScriptedBackend,
};
pub use template::{OneShot, PromptTemplate};

use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Environment variable consulted when no API key is configured.
pub const API_KEY_ENV: &str = "TRANSPILOT_API_KEY";

/// Decoding parameters sent with every completion request.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodeParams {
    pub temperature: f64,
    /// Whether the backend may sample; off means greedy decoding.
    pub sampling: bool,
    pub max_tokens: u32,
}

impl Default for DecodeParams {
    fn default() -> Self {
        DecodeParams {
            temperature: 0.0,
            sampling: false,
            max_tokens: 4096,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub text: String,
}

/// One fully rendered chat request. `template` names the prompt that
/// produced it and participates in the replay digest, so two different
/// prompts rendering to coincidentally equal text stay distinguishable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub template: String,
    pub system: String,
    pub messages: Vec<Message>,
    pub decode: DecodeParams,
}

impl ChatRequest {
    /// Stable identity of this request; see [`request_digest`].
    pub fn digest(&self) -> String {
        request_digest(self)
    }

    /// The final user turn — the rendered prompt proper (one-shot
    /// example turns precede it).
    pub fn last_user_text(&self) -> &str {
        self.messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .map(|m| m.text.as_str())
            .unwrap_or("")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

/// One completion. `latency_ms` is observational only: it is excluded
/// from digests and from stored transcripts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    pub usage: Usage,
    pub latency_ms: u64,
}

/// Content hash identifying a request across record/replay runs.
///
/// Hashes the canonical JSON of the request struct — template name,
/// system text, message turns, decode parameters — and nothing else, so
/// timestamps and latencies can never perturb replay keys.
pub fn request_digest(req: &ChatRequest) -> String {
    let canonical = serde_json::to_string(req).expect("request serialization cannot fail");
    let mut hasher = Sha256::new();
    hasher.update(canonical.as_bytes());
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Which backend the gateway drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LlmMode {
    Live,
    Replay,
    Record,
}

impl std::str::FromStr for LlmMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "live" => Ok(LlmMode::Live),
            "replay" => Ok(LlmMode::Replay),
            "record" => Ok(LlmMode::Record),
            other => Err(format!("unknown llm mode `{other}` (expected live|replay|record)")),
        }
    }
}

impl std::fmt::Display for LlmMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LlmMode::Live => "live",
            LlmMode::Replay => "replay",
            LlmMode::Record => "record",
        })
    }
}

/// Gateway section of the pipeline configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmSettings {
    pub mode: LlmMode,
    pub base_url: String,
    pub model: String,
    /// Bearer token; falls back to the `TRANSPILOT_API_KEY` environment
    /// variable when absent.
    pub api_key: Option<String>,
    /// Transcript directory for `replay` and `record` modes.
    pub replay_dir: Option<PathBuf>,
    pub request_timeout_ms: u64,
}

impl Default for LlmSettings {
    fn default() -> Self {
        LlmSettings {
            mode: LlmMode::Replay,
            base_url: "http://127.0.0.1:8000/v1".to_string(),
            model: String::new(),
            api_key: None,
            replay_dir: None,
            request_timeout_ms: 120_000,
        }
    }
}

impl LlmSettings {
    /// Resolve the API key from config or environment.
    pub fn resolve_api_key(&self) -> Option<String> {
        self.api_key
            .clone()
            .or_else(|| std::env::var(API_KEY_ENV).ok())
    }
}

const MAX_RETRIES: u32 = 3;
const INITIAL_BACKOFF_MS: u64 = 250;

/// Shared completion client: bounded retries over a pluggable backend
/// plus call accounting. Safe for concurrent callers; the backend is
/// read-only during runs.
pub struct LlmClient {
    backend: Box<dyn ChatBackend>,
    calls: AtomicU64,
    retries: AtomicU64,
}

impl LlmClient {
    pub fn with_backend(backend: Box<dyn ChatBackend>) -> Self {
        LlmClient {
            backend,
            calls: AtomicU64::new(0),
            retries: AtomicU64::new(0),
        }
    }

    /// Build the backend stack the settings describe.
    pub fn from_settings(settings: &LlmSettings) -> Result<Self> {
        let replay_dir = || -> Result<PathBuf> {
            settings.replay_dir.clone().ok_or_else(|| Error::Config {
                detail: format!("llm.mode={} requires llm.replay_dir", settings.mode),
            })
        };
        let backend: Box<dyn ChatBackend> = match settings.mode {
            LlmMode::Live => Box::new(HttpBackend::new(settings)?),
            LlmMode::Replay => Box::new(ReplayBackend::new(ReplayStore::new(replay_dir()?))),
            LlmMode::Record => Box::new(RecordBackend::new(
                Box::new(HttpBackend::new(settings)?),
                ReplayStore::new(replay_dir()?),
            )),
        };
        Ok(LlmClient::with_backend(backend))
    }

    /// One completion, retrying transient transport failures up to
    /// three times with exponential backoff.
    pub fn complete(&self, req: &ChatRequest) -> Result<ChatResponse> {
        let mut backoff = INITIAL_BACKOFF_MS;
        let mut attempt = 0;
        loop {
            match self.backend.complete(req) {
                Ok(resp) => {
                    if resp.text.is_empty() {
                        return Err(Error::BackendUnavailable {
                            detail: "backend returned an empty completion".to_string(),
                            transient: false,
                        });
                    }
                    self.calls.fetch_add(1, Ordering::Relaxed);
                    return Ok(resp);
                }
                Err(e) if e.is_transient() && attempt < MAX_RETRIES => {
                    attempt += 1;
                    self.retries.fetch_add(1, Ordering::Relaxed);
                    std::thread::sleep(std::time::Duration::from_millis(backoff));
                    backoff *= 2;
                }
                Err(e) => return Err(e),
            }
        }
    }

    /// Completion whose answer must contain a fenced code region. When
    /// the first reply has none, re-prompts exactly once; a second miss
    /// is an extraction failure attributed to `label`. The extracted
    /// code always ends with a newline, so callers can treat it as a
    /// complete program text.
    pub fn complete_code(&self, req: &ChatRequest, label: &str) -> Result<String> {
        let first = self.complete(req)?;
        if let Some(code) = extract_code(&first.text) {
            return Ok(terminated(code));
        }
        let mut retry = req.clone();
        retry.messages.push(Message {
            role: Role::Assistant,
            text: first.text,
        });
        retry.messages.push(Message {
            role: Role::User,
            text: "Your reply contained no fenced code block. Reply again with only the \
                   code, inside a fenced code block."
                .to_string(),
        });
        let second = self.complete(&retry)?;
        match extract_code(&second.text) {
            Some(code) => Ok(terminated(code)),
            None => Err(Error::ExtractionFailure {
                label: label.to_string(),
            }),
        }
    }

    /// Completions served so far (successful only).
    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    /// Transient-failure retries performed so far.
    pub fn retries(&self) -> u64 {
        self.retries.load(Ordering::Relaxed)
    }
}

/// Extract the first fenced code region from a model reply.
///
/// A region opens with a line whose trimmed text starts with ``` (an
/// optional language tag may follow on the same line) and closes at the
/// next line starting with ```. An unterminated fence is not a region.
pub fn extract_code(text: &str) -> Option<String> {
    let mut in_fence = false;
    let mut body: Vec<&str> = Vec::new();
    for line in text.lines() {
        let trimmed = line.trim_start();
        if !in_fence {
            if trimmed.starts_with("```") {
                in_fence = true;
            }
            continue;
        }
        if trimmed.starts_with("```") {
            return Some(body.join("\n"));
        }
        body.push(line);
    }
    None
}

fn terminated(mut code: String) -> String {
    if !code.ends_with('\n') {
        code.push('\n');
    }
    code
}
