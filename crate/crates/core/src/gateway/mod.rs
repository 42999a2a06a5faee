//! Backend-agnostic chat interface with tool calling, plus usage, cost and
//! energy accounting.
//!
//! Two backends: `http_chat` speaks an OpenAI-compatible chat-completions
//! protocol; `scripted` replays a fixed response sequence with fixed token
//! counts, which makes whole workflows deterministic and testable offline.
//! Token counts always come from the backend's usage report, never from
//! client-side tokenization.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::clock::SharedClock;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("backend error: {0}")]
    Backend(String),
    #[error("scripted backend exhausted after {0} responses")]
    ScriptExhausted(usize),
    #[error("malformed tool call: {0}")]
    MalformedToolCall(String),
    #[error("invalid backend config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
    Tool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ToolCall {
    pub name: String,
    /// Raw arguments text, conventionally a JSON object.
    pub arguments: String,
    pub id: String,
}

/// One chat turn. Tool calls only appear on assistant messages and
/// `tool_call_id` only on tool messages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tool_calls: Vec<ToolCall>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_call_id: Option<String>,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> ChatMessage {
        ChatMessage {
            role: Role::System,
            content: content.into(),
            tool_calls: Vec::new(),
            tool_call_id: None,
        }
    }

    pub fn user(content: impl Into<String>) -> ChatMessage {
        ChatMessage {
            role: Role::User,
            content: content.into(),
            tool_calls: Vec::new(),
            tool_call_id: None,
        }
    }

    pub fn assistant(content: impl Into<String>) -> ChatMessage {
        ChatMessage {
            role: Role::Assistant,
            content: content.into(),
            tool_calls: Vec::new(),
            tool_call_id: None,
        }
    }

    pub fn tool_result(call_id: impl Into<String>, content: impl Into<String>) -> ChatMessage {
        ChatMessage {
            role: Role::Tool,
            content: content.into(),
            tool_calls: Vec::new(),
            tool_call_id: Some(call_id.into()),
        }
    }
}

/// A callable tool advertised to the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolSpec {
    pub name: String,
    pub description: String,
    /// JSON schema of the arguments object.
    pub parameters: Value,
}

/// Per-1M-token pricing; rates are configuration, no vendor rate is baked in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct PricingModel {
    #[serde(default)]
    pub input_per_million: f64,
    #[serde(default)]
    pub output_per_million: f64,
}

impl Default for PricingModel {
    fn default() -> Self {
        PricingModel {
            input_per_million: 0.0,
            output_per_million: 0.0,
        }
    }
}

pub const DEFAULT_WH_PER_TOKEN: f64 = 0.000_06;

/// Per-token energy estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct EnergyModel {
    #[serde(default = "default_wh_per_token")]
    pub wh_per_token: f64,
}

fn default_wh_per_token() -> f64 {
    DEFAULT_WH_PER_TOKEN
}

impl Default for EnergyModel {
    fn default() -> Self {
        EnergyModel {
            wh_per_token: DEFAULT_WH_PER_TOKEN,
        }
    }
}

/// Token counts and wall time of one model call, as reported by the backend.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CallUsage {
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub wall_time_ms: u64,
}

/// One ledger entry: a call's usage tagged with the agent role that made it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct UsageEntry {
    pub role_tag: String,
    #[serde(flatten)]
    pub usage: CallUsage,
}

/// Append-only record of model calls; aggregates are derived, never stored.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageLedger {
    pub entries: Vec<UsageEntry>,
}

impl UsageLedger {
    pub fn new() -> UsageLedger {
        UsageLedger::default()
    }

    /// Value-semantics append: the input ledger is unchanged.
    pub fn record_usage(&self, role_tag: &str, usage: CallUsage) -> UsageLedger {
        let mut next = self.clone();
        next.push(role_tag, usage);
        next
    }

    pub fn push(&mut self, role_tag: &str, usage: CallUsage) {
        self.entries.push(UsageEntry {
            role_tag: role_tag.to_string(),
            usage,
        });
    }

    pub fn merge(&mut self, other: &UsageLedger) {
        self.entries.extend(other.entries.iter().cloned());
    }

    pub fn input_tokens(&self) -> u64 {
        self.entries.iter().map(|e| e.usage.input_tokens).sum()
    }

    pub fn output_tokens(&self) -> u64 {
        self.entries.iter().map(|e| e.usage.output_tokens).sum()
    }

    pub fn total_tokens(&self) -> u64 {
        self.input_tokens() + self.output_tokens()
    }

    pub fn wall_time_ms(&self) -> u64 {
        self.entries.iter().map(|e| e.usage.wall_time_ms).sum()
    }

    /// Totals per role tag, in first-seen order.
    pub fn per_role(&self) -> Vec<(String, CallUsage)> {
        let mut order: Vec<String> = Vec::new();
        let mut totals: BTreeMap<String, CallUsage> = BTreeMap::new();
        for e in &self.entries {
            if !totals.contains_key(&e.role_tag) {
                order.push(e.role_tag.clone());
            }
            let t = totals.entry(e.role_tag.clone()).or_default();
            t.input_tokens += e.usage.input_tokens;
            t.output_tokens += e.usage.output_tokens;
            t.wall_time_ms += e.usage.wall_time_ms;
        }
        order
            .into_iter()
            .map(|r| {
                let t = totals[&r];
                (r, t)
            })
            .collect()
    }
}

/// input × input rate + output × output rate, rates per 1M tokens.
pub fn cost_of(ledger: &UsageLedger, pricing: &PricingModel) -> f64 {
    ledger.input_tokens() as f64 / 1_000_000.0 * pricing.input_per_million
        + ledger.output_tokens() as f64 / 1_000_000.0 * pricing.output_per_million
}

/// (input + output tokens) × watt-hours per token.
pub fn energy_of(ledger: &UsageLedger, energy: &EnergyModel) -> f64 {
    ledger.total_tokens() as f64 * energy.wh_per_token
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    HttpChat,
    Scripted,
}

pub const DEFAULT_MODEL_NAME: &str = "gpt-4o-mini";
pub const DEFAULT_API_KEY_ENV: &str = "LLM_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(default = "default_model_name")]
    pub model_name: String,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_api_key_env")]
    pub api_key_env: String,
    #[serde(default)]
    pub pricing: PricingModel,
    #[serde(default)]
    pub energy: EnergyModel,
    /// Script file for `scripted` backends.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub script_path: Option<String>,
    /// Extra transport retries for `http_chat` (single configurable count).
    #[serde(default)]
    pub max_retries: u32,
    #[serde(default = "default_http_timeout_ms")]
    pub timeout_ms: u64,
}

fn default_model_name() -> String {
    DEFAULT_MODEL_NAME.to_string()
}

fn default_api_key_env() -> String {
    DEFAULT_API_KEY_ENV.to_string()
}

fn default_http_timeout_ms() -> u64 {
    120_000
}

impl BackendConfig {
    pub fn scripted_inline(responses: Vec<ScriptedResponse>) -> (BackendConfig, ChatBackend) {
        let config = BackendConfig {
            kind: BackendKind::Scripted,
            endpoint: None,
            model_name: default_model_name(),
            temperature: 0.0,
            api_key_env: default_api_key_env(),
            pricing: PricingModel::default(),
            energy: EnergyModel::default(),
            script_path: None,
            max_retries: 0,
            timeout_ms: default_http_timeout_ms(),
        };
        let backend = ChatBackend::Scripted(ScriptedBackend::new(responses));
        (config, backend)
    }

    /// Instantiate the backend this config describes.
    pub fn connect(&self) -> Result<ChatBackend, GatewayError> {
        if self.temperature < 0.0 {
            return Err(GatewayError::InvalidConfig(format!(
                "temperature must be >= 0, got {}",
                self.temperature
            )));
        }
        match self.kind {
            BackendKind::Scripted => {
                let path = self.script_path.as_ref().ok_or_else(|| {
                    GatewayError::InvalidConfig("scripted backend needs scriptPath".into())
                })?;
                Ok(ChatBackend::Scripted(ScriptedBackend::from_file(Path::new(path))?))
            }
            BackendKind::HttpChat => {
                let endpoint = self.endpoint.clone().ok_or_else(|| {
                    GatewayError::InvalidConfig("http_chat backend needs endpoint".into())
                })?;
                Ok(ChatBackend::Http(HttpChatBackend {
                    endpoint,
                    model_name: self.model_name.clone(),
                    temperature: self.temperature,
                    api_key_env: self.api_key_env.clone(),
                    max_retries: self.max_retries,
                    timeout_ms: self.timeout_ms,
                }))
            }
        }
    }
}

/// One scripted turn: what the fake model answers and at what token cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ScriptedResponse {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub content: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tool_calls: Vec<ScriptedToolCall>,
    #[serde(default)]
    pub input_tokens: u64,
    #[serde(default)]
    pub output_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ScriptedToolCall {
    pub name: String,
    pub arguments: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
}

/// Deterministic fake model: replays its script in order.
pub struct ScriptedBackend {
    script: Vec<ScriptedResponse>,
    cursor: Mutex<usize>,
}

impl ScriptedBackend {
    pub fn new(script: Vec<ScriptedResponse>) -> ScriptedBackend {
        ScriptedBackend {
            script,
            cursor: Mutex::new(0),
        }
    }

    pub fn from_file(path: &Path) -> Result<ScriptedBackend, GatewayError> {
        let bytes = std::fs::read(path)
            .map_err(|e| GatewayError::InvalidConfig(format!("cannot read script {path:?}: {e}")))?;
        let script: Vec<ScriptedResponse> = serde_json::from_slice(&bytes)
            .map_err(|e| GatewayError::InvalidConfig(format!("invalid script {path:?}: {e}")))?;
        Ok(ScriptedBackend::new(script))
    }

    fn next(&self) -> Result<(ChatMessage, CallUsage), GatewayError> {
        let mut cursor = self.cursor.lock().expect("script cursor poisoned");
        let index = *cursor;
        let Some(entry) = self.script.get(index) else {
            return Err(GatewayError::ScriptExhausted(self.script.len()));
        };
        *cursor += 1;
        let tool_calls = entry
            .tool_calls
            .iter()
            .enumerate()
            .map(|(i, c)| ToolCall {
                name: c.name.clone(),
                arguments: c.arguments.clone(),
                id: c.id.clone().unwrap_or_else(|| format!("call-{index}-{i}")),
            })
            .collect();
        let message = ChatMessage {
            role: Role::Assistant,
            content: entry.content.clone().unwrap_or_default(),
            tool_calls,
            tool_call_id: None,
        };
        // scripted wall time is fixed at zero so transcripts and ledgers
        // are byte-identical across runs
        let usage = CallUsage {
            input_tokens: entry.input_tokens,
            output_tokens: entry.output_tokens,
            wall_time_ms: 0,
        };
        Ok((message, usage))
    }
}

/// OpenAI-compatible chat-completions client.
pub struct HttpChatBackend {
    endpoint: String,
    model_name: String,
    temperature: f64,
    api_key_env: String,
    max_retries: u32,
    timeout_ms: u64,
}

impl HttpChatBackend {
    fn complete(
        &self,
        messages: &[ChatMessage],
        tools: Option<&[ToolSpec]>,
        clock: &SharedClock,
    ) -> Result<(ChatMessage, CallUsage), GatewayError> {
        let payload = wire_request(&self.model_name, self.temperature, messages, tools);
        let body = serde_json::to_vec(&payload)
            .map_err(|e| GatewayError::Backend(format!("request encoding failed: {e}")))?;
        let api_key = std::env::var(&self.api_key_env).ok();

        let agent = crate::executor::build_agent(self.timeout_ms);
        let started = clock.now_unix_ms();
        let mut last_err = None;
        for _ in 0..=self.max_retries {
            let mut request = agent
                .post(&self.endpoint)
                .header("Content-Type", "application/json");
            if let Some(key) = &api_key {
                request = request.header("Authorization", &format!("Bearer {key}"));
            }
            match request.send(&body[..]) {
                Ok(mut response) => {
                    let status = response.status().as_u16();
                    let text = response
                        .body_mut()
                        .read_to_string()
                        .map_err(|e| GatewayError::Backend(format!("response read failed: {e}")))?;
                    if !(200..300).contains(&status) {
                        return Err(GatewayError::Backend(format!(
                            "chat endpoint returned {status}: {}",
                            text.chars().take(300).collect::<String>()
                        )));
                    }
                    let wall_time_ms = (clock.now_unix_ms() - started).max(0) as u64;
                    return parse_wire_response(&text, wall_time_ms);
                }
                Err(e) => last_err = Some(e),
            }
        }
        Err(GatewayError::Backend(format!(
            "chat endpoint unreachable: {}",
            last_err.map(|e| e.to_string()).unwrap_or_default()
        )))
    }
}

fn wire_request(
    model: &str,
    temperature: f64,
    messages: &[ChatMessage],
    tools: Option<&[ToolSpec]>,
) -> Value {
    let messages: Vec<Value> = messages
        .iter()
        .map(|m| {
            let role = match m.role {
                Role::System => "system",
                Role::User => "user",
                Role::Assistant => "assistant",
                Role::Tool => "tool",
            };
            let mut obj = json!({"role": role, "content": m.content});
            if !m.tool_calls.is_empty() {
                obj["tool_calls"] = Value::Array(
                    m.tool_calls
                        .iter()
                        .map(|c| {
                            json!({
                                "id": c.id,
                                "type": "function",
                                "function": {"name": c.name, "arguments": c.arguments}
                            })
                        })
                        .collect(),
                );
            }
            if let Some(id) = &m.tool_call_id {
                obj["tool_call_id"] = json!(id);
            }
            obj
        })
        .collect();

    let mut payload = json!({
        "model": model,
        "temperature": temperature,
        "messages": messages,
    });
    if let Some(tools) = tools {
        if !tools.is_empty() {
            payload["tools"] = Value::Array(
                tools
                    .iter()
                    .map(|t| {
                        json!({
                            "type": "function",
                            "function": {
                                "name": t.name,
                                "description": t.description,
                                "parameters": t.parameters,
                            }
                        })
                    })
                    .collect(),
            );
        }
    }
    payload
}

fn parse_wire_response(text: &str, wall_time_ms: u64) -> Result<(ChatMessage, CallUsage), GatewayError> {
    let value: Value = serde_json::from_str(text)
        .map_err(|e| GatewayError::Backend(format!("chat endpoint returned invalid JSON: {e}")))?;
    let message = value
        .pointer("/choices/0/message")
        .ok_or_else(|| GatewayError::Backend("response has no choices[0].message".into()))?;
    let content = message
        .get("content")
        .and_then(Value::as_str)
        .unwrap_or("")
        .to_string();
    let mut tool_calls = Vec::new();
    if let Some(calls) = message.get("tool_calls").and_then(Value::as_array) {
        for call in calls {
            let id = call
                .get("id")
                .and_then(Value::as_str)
                .ok_or_else(|| GatewayError::MalformedToolCall("missing id".into()))?;
            let name = call
                .pointer("/function/name")
                .and_then(Value::as_str)
                .ok_or_else(|| GatewayError::MalformedToolCall("missing function.name".into()))?;
            let arguments = call
                .pointer("/function/arguments")
                .and_then(Value::as_str)
                .unwrap_or("{}")
                .to_string();
            tool_calls.push(ToolCall {
                name: name.to_string(),
                arguments,
                id: id.to_string(),
            });
        }
    }
    let usage = CallUsage {
        input_tokens: value
            .pointer("/usage/prompt_tokens")
            .and_then(Value::as_u64)
            .unwrap_or(0),
        output_tokens: value
            .pointer("/usage/completion_tokens")
            .and_then(Value::as_u64)
            .unwrap_or(0),
        wall_time_ms,
    };
    Ok((
        ChatMessage {
            role: Role::Assistant,
            content,
            tool_calls,
            tool_call_id: None,
        },
        usage,
    ))
}

/// A connected backend; safe for sequential reuse across a whole run.
pub enum ChatBackend {
    Scripted(ScriptedBackend),
    Http(HttpChatBackend),
}

impl ChatBackend {
    /// The single model-call primitive: returns the assistant message and
    /// the backend-reported token counts.
    pub fn complete(
        &self,
        messages: &[ChatMessage],
        tools: Option<&[ToolSpec]>,
        clock: &SharedClock,
    ) -> Result<(ChatMessage, CallUsage), GatewayError> {
        if messages.is_empty() {
            return Err(GatewayError::Backend("messages must be non-empty".into()));
        }
        if !matches!(messages[0].role, Role::System | Role::User) {
            return Err(GatewayError::Backend(
                "first message must be system or user".into(),
            ));
        }
        match self {
            ChatBackend::Scripted(s) => s.next(),
            ChatBackend::Http(h) => h.complete(messages, tools, clock),
        }
    }
}
