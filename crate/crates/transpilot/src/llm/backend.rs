//! The four chat backends behind [`LlmClient`](super::LlmClient).
//!
//! Transcripts are plain JSON files named by request digest, one
//! exchange per file, so a recorded session doubles as a reviewable
//! fixture: `<replay_dir>/<digest>.json` holding `{request, response}`.
//! Latency is deliberately absent from stored responses — replayed runs
//! must be byte-identical regardless of original network timing.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{ChatRequest, ChatResponse, LlmSettings, Role, Usage};

/// A chat completion provider. Implementations must be safe for
/// concurrent callers.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse>;

    /// Short name for capability reports and logs.
    fn name(&self) -> &'static str;
}

// ---------- live ----------

/// Live backend speaking the OpenAI chat-completions wire protocol.
pub struct HttpBackend {
    agent: ureq::Agent,
    url: String,
    model: String,
    api_key: Option<String>,
}

impl HttpBackend {
    pub fn new(settings: &LlmSettings) -> Result<Self> {
        if settings.model.is_empty() {
            return Err(Error::Config {
                detail: "llm.model must be set for live/record mode".to_string(),
            });
        }
        let agent = ureq::AgentBuilder::new()
            .timeout(std::time::Duration::from_millis(settings.request_timeout_ms))
            .build();
        Ok(HttpBackend {
            agent,
            url: format!(
                "{}/chat/completions",
                settings.base_url.trim_end_matches('/')
            ),
            model: settings.model.clone(),
            api_key: settings.resolve_api_key(),
        })
    }
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
    #[serde(default)]
    usage: Option<WireUsage>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
}

#[derive(Deserialize)]
struct WireMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct WireUsage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

impl ChatBackend for HttpBackend {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse> {
        let mut messages = Vec::with_capacity(req.messages.len() + 1);
        messages.push(serde_json::json!({"role": "system", "content": req.system}));
        for m in &req.messages {
            let role = match m.role {
                Role::User => "user",
                Role::Assistant => "assistant",
            };
            messages.push(serde_json::json!({"role": role, "content": m.text}));
        }
        // `sampling=false` maps onto temperature 0 here; the flag itself
        // still participates in the digest for replay identity.
        let body = serde_json::json!({
            "model": self.model,
            "messages": messages,
            "temperature": req.decode.temperature,
            "max_tokens": req.decode.max_tokens,
        });

        let start = Instant::now();
        let mut call = self.agent.post(&self.url);
        if let Some(key) = &self.api_key {
            call = call.set("authorization", &format!("Bearer {key}"));
        }
        let response = match call.send_json(body) {
            Ok(r) => r,
            Err(ureq::Error::Status(code, r)) => {
                let detail = r
                    .into_string()
                    .unwrap_or_default()
                    .chars()
                    .take(500)
                    .collect::<String>();
                return Err(Error::BackendUnavailable {
                    detail: format!("HTTP {code}: {detail}"),
                    transient: code == 429 || code >= 500,
                });
            }
            Err(ureq::Error::Transport(t)) => {
                return Err(Error::BackendUnavailable {
                    detail: t.to_string(),
                    transient: true,
                })
            }
        };
        let latency_ms = start.elapsed().as_millis() as u64;

        let wire: WireResponse =
            response
                .into_json()
                .map_err(|e| Error::BackendUnavailable {
                    detail: format!("malformed completion payload: {e}"),
                    transient: false,
                })?;
        let text = wire
            .choices
            .first()
            .and_then(|c| c.message.content.clone())
            .unwrap_or_default();
        let usage = wire
            .usage
            .map(|u| Usage {
                prompt_tokens: u.prompt_tokens,
                completion_tokens: u.completion_tokens,
            })
            .unwrap_or_default();
        Ok(ChatResponse {
            text,
            usage,
            latency_ms,
        })
    }

    fn name(&self) -> &'static str {
        "live"
    }
}

// ---------- transcript store ----------

/// One stored exchange. The request is kept verbatim so transcripts are
/// reviewable and so `record` fixtures document what was asked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredExchange {
    pub request: ChatRequest,
    pub response: StoredResponse,
}

/// The durable part of a response: text and token usage, no timing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredResponse {
    pub text: String,
    #[serde(default)]
    pub usage: Usage,
}

/// A directory of digest-named transcript files.
#[derive(Debug, Clone)]
pub struct ReplayStore {
    dir: PathBuf,
}

impl ReplayStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        ReplayStore { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path_for(&self, digest: &str) -> PathBuf {
        self.dir.join(format!("{digest}.json"))
    }

    /// Load the exchange recorded for `digest`, if any.
    pub fn load(&self, digest: &str) -> Result<Option<StoredExchange>> {
        let path = self.path_for(digest);
        if !path.exists() {
            return Ok(None);
        }
        let text = std::fs::read_to_string(&path)?;
        Ok(Some(serde_json::from_str(&text)?))
    }

    /// Persist one exchange under its request digest.
    pub fn save(&self, request: &ChatRequest, response: &StoredResponse) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.dir)?;
        let path = self.path_for(&request.digest());
        let exchange = StoredExchange {
            request: request.clone(),
            response: response.clone(),
        };
        let mut text = serde_json::to_string_pretty(&exchange)?;
        text.push('\n');
        std::fs::write(&path, text)?;
        Ok(path)
    }

    /// Number of transcript files present.
    pub fn len(&self) -> usize {
        std::fs::read_dir(&self.dir)
            .map(|entries| {
                entries
                    .filter_map(|e| e.ok())
                    .filter(|e| e.path().extension().is_some_and(|x| x == "json"))
                    .count()
            })
            .unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Deterministic backend answering only requests present in its store.
pub struct ReplayBackend {
    store: ReplayStore,
}

impl ReplayBackend {
    pub fn new(store: ReplayStore) -> Self {
        ReplayBackend { store }
    }
}

impl ChatBackend for ReplayBackend {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse> {
        let digest = req.digest();
        match self.store.load(&digest)? {
            Some(exchange) => Ok(ChatResponse {
                text: exchange.response.text,
                usage: exchange.response.usage,
                latency_ms: 0,
            }),
            None => Err(Error::ReplayMiss { digest }),
        }
    }

    fn name(&self) -> &'static str {
        "replay"
    }
}

/// Pass-through backend that records every exchange it serves. Wraps
/// the live backend in `record` mode; tests wrap scripted stand-ins to
/// fabricate replay fixtures the honest way.
pub struct RecordBackend {
    inner: Box<dyn ChatBackend>,
    store: ReplayStore,
}

impl RecordBackend {
    pub fn new(inner: Box<dyn ChatBackend>, store: ReplayStore) -> Self {
        RecordBackend { inner, store }
    }
}

impl ChatBackend for RecordBackend {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse> {
        let resp = self.inner.complete(req)?;
        self.store.save(
            req,
            &StoredResponse {
                text: resp.text.clone(),
                usage: resp.usage,
            },
        )?;
        Ok(resp)
    }

    fn name(&self) -> &'static str {
        "record"
    }
}

/// Backend computing answers from the request itself. The workhorse for
/// offline examples and agent tests: a rule inspects the rendered
/// prompt and fabricates the model's reply, `None` meaning unscripted.
pub struct FnBackend {
    rule: Box<dyn Fn(&ChatRequest) -> Option<String> + Send + Sync>,
}

impl FnBackend {
    pub fn new(rule: impl Fn(&ChatRequest) -> Option<String> + Send + Sync + 'static) -> Self {
        FnBackend {
            rule: Box::new(rule),
        }
    }
}

impl ChatBackend for FnBackend {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse> {
        match (self.rule)(req) {
            Some(text) => Ok(ChatResponse {
                text,
                usage: Usage::default(),
                latency_ms: 0,
            }),
            None => Err(Error::ReplayMiss {
                digest: req.digest(),
            }),
        }
    }

    fn name(&self) -> &'static str {
        "scripted-fn"
    }
}

/// In-memory digest→answer map for unit tests: the replay contract
/// without touching disk.
pub struct ScriptedBackend {
    answers: BTreeMap<String, String>,
}

impl ScriptedBackend {
    pub fn new(answers: BTreeMap<String, String>) -> Self {
        ScriptedBackend { answers }
    }

    /// Script `answer` for exactly `req`.
    pub fn script(mut self, req: &ChatRequest, answer: impl Into<String>) -> Self {
        self.answers.insert(req.digest(), answer.into());
        self
    }
}

impl Default for ScriptedBackend {
    fn default() -> Self {
        ScriptedBackend {
            answers: BTreeMap::new(),
        }
    }
}

impl ChatBackend for ScriptedBackend {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse> {
        let digest = req.digest();
        match self.answers.get(&digest) {
            Some(text) => Ok(ChatResponse {
                text: text.clone(),
                usage: Usage::default(),
                latency_ms: 0,
            }),
            None => Err(Error::ReplayMiss { digest }),
        }
    }

    fn name(&self) -> &'static str {
        "scripted"
    }
}
