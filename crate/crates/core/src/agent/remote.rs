//! OpenAI-compatible `/chat/completions` backend.
//!
//! Configuration comes from the environment:
//! `GAZEGROUND_API_KEY` (falls back to `OPENAI_API_KEY`),
//! `GAZEGROUND_BASE_URL` and `GAZEGROUND_MODEL`.

use std::time::Duration;

use serde_json::{json, Map, Value};

use super::backend::{Backend, BackendError, CompletionRequest, CompletionResponse, Message, ToolCall};
use super::tools::ToolSpec;

pub const DEFAULT_BASE_URL: &str = "https://api.openai.com/v1";
pub const DEFAULT_REMOTE_MODEL: &str = "gpt-4-0125-preview";

#[derive(Debug, Clone, PartialEq)]
pub struct RemoteConfig {
    pub base_url: String,
    pub api_key: String,
    /// Overrides the model named in each request when set.
    pub model: Option<String>,
    pub timeout: Duration,
}

impl RemoteConfig {
    pub fn from_env() -> Result<Self, BackendError> {
        let api_key = std::env::var("GAZEGROUND_API_KEY")
            .or_else(|_| std::env::var("OPENAI_API_KEY"))
            .map_err(|_| {
                BackendError::Config("set GAZEGROUND_API_KEY or OPENAI_API_KEY to use the remote backend".into())
            })?;
        Ok(Self {
            base_url: std::env::var("GAZEGROUND_BASE_URL").unwrap_or_else(|_| DEFAULT_BASE_URL.to_string()),
            api_key,
            model: Some(std::env::var("GAZEGROUND_MODEL").unwrap_or_else(|_| DEFAULT_REMOTE_MODEL.to_string())),
            timeout: Duration::from_secs(120),
        })
    }
}

pub struct RemoteBackend {
    config: RemoteConfig,
    client: reqwest::blocking::Client,
}

impl std::fmt::Debug for RemoteBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteBackend")
            .field("base_url", &self.config.base_url)
            .field("model", &self.config.model)
            .finish()
    }
}

impl RemoteBackend {
    pub fn new(config: RemoteConfig) -> Result<Self, BackendError> {
        if config.api_key.trim().is_empty() {
            return Err(BackendError::Config("empty API key".into()));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| BackendError::Config(e.to_string()))?;
        Ok(Self { config, client })
    }

    pub fn from_env() -> Result<Self, BackendError> {
        Self::new(RemoteConfig::from_env()?)
    }

    fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'))
    }
}

fn tool_json(spec: &ToolSpec) -> Value {
    let mut properties = Map::new();
    for p in &spec.parameters {
        let schema = if p.param_type == "array" {
            json!({"type": "array", "items": {"type": "string"}, "description": p.description})
        } else {
            json!({"type": p.param_type, "description": p.description})
        };
        properties.insert(p.name.clone(), schema);
    }
    let required: Vec<&str> = spec.parameters.iter().map(|p| p.name.as_str()).collect();
    json!({
        "type": "function",
        "function": {
            "name": spec.name,
            "description": spec.description,
            "parameters": {"type": "object", "properties": properties, "required": required},
        }
    })
}

fn message_json(message: &Message) -> Value {
    match message {
        Message::System { content } => json!({"role": "system", "content": content}),
        Message::User { content } => json!({"role": "user", "content": content}),
        Message::Assistant { content, tool_calls } => {
            let mut m = json!({"role": "assistant", "content": content});
            if !tool_calls.is_empty() {
                m["tool_calls"] = tool_calls
                    .iter()
                    .map(|c| {
                        json!({
                            "id": c.id,
                            "type": "function",
                            "function": {"name": c.name, "arguments": Value::Object(c.arguments.clone()).to_string()},
                        })
                    })
                    .collect();
            }
            m
        }
        Message::Tool {
            tool_call_id,
            name,
            content,
        } => json!({"role": "tool", "tool_call_id": tool_call_id, "name": name, "content": content}),
    }
}

/// Wire body for a request.
pub fn request_body(request: &CompletionRequest, model_override: Option<&str>) -> Value {
    let mut body = json!({
        "model": model_override.unwrap_or(&request.model),
        "temperature": request.temperature,
        "messages": request.messages.iter().map(message_json).collect::<Vec<_>>(),
    });
    if !request.tools.is_empty() {
        body["tools"] = request.tools.iter().map(tool_json).collect();
    }
    body
}

/// Parses a `/chat/completions` response body. Tool-call arguments that are
/// not valid JSON are kept as a raw string so the dispatcher can reject them.
pub fn parse_response(body: &Value) -> Result<CompletionResponse, BackendError> {
    let message = body
        .pointer("/choices/0/message")
        .ok_or_else(|| BackendError::Protocol("response has no choices[0].message".into()))?;
    let content = message.get("content").and_then(Value::as_str).map(String::from);
    let mut tool_calls = Vec::new();
    if let Some(calls) = message.get("tool_calls").and_then(Value::as_array) {
        for (i, call) in calls.iter().enumerate() {
            let name = call
                .pointer("/function/name")
                .and_then(Value::as_str)
                .ok_or_else(|| BackendError::Protocol(format!("tool call {i} has no function name")))?;
            let id = call
                .get("id")
                .and_then(Value::as_str)
                .map(String::from)
                .unwrap_or_else(|| format!("call_{i}"));
            let arguments = match call.pointer("/function/arguments") {
                Some(Value::String(s)) if s.trim().is_empty() => Value::Null,
                Some(Value::String(s)) => serde_json::from_str(s).unwrap_or_else(|_| Value::String(s.clone())),
                Some(other) => other.clone(),
                None => Value::Null,
            };
            tool_calls.push(ToolCall::new(id, name, arguments));
        }
    }
    Ok(CompletionResponse { content, tool_calls })
}

impl Backend for RemoteBackend {
    fn name(&self) -> &str {
        "remote"
    }

    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        let body = request_body(request, self.config.model.as_deref());
        let response = self
            .client
            .post(self.endpoint())
            .bearer_auth(&self.config.api_key)
            .json(&body)
            .send()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = response.status();
        let text = response.text().map_err(|e| BackendError::Transport(e.to_string()))?;
        if status.is_server_error() || status.as_u16() == 429 {
            return Err(BackendError::Transport(format!("HTTP {status}: {text}")));
        }
        if !status.is_success() {
            return Err(BackendError::Protocol(format!("HTTP {status}: {text}")));
        }
        let value: Value =
            serde_json::from_str(&text).map_err(|e| BackendError::Protocol(format!("invalid JSON body: {e}")))?;
        parse_response(&value)
    }
}
