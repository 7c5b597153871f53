use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{ChatProvider, ChatRequest, ChatResponse, GatewayError, Role};
use crate::curation::ToolCall;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpProviderConfig {
    /// Base URL; requests go to `<base_url>/chat/completions`.
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token.
    pub api_key_env: Option<String>,
    pub timeout_secs: u64,
    pub retries: u32,
}

impl Default for HttpProviderConfig {
    fn default() -> Self {
        Self {
            base_url: "http://127.0.0.1:8000/v1".into(),
            model: String::new(),
            api_key_env: None,
            timeout_secs: 120,
            retries: 2,
        }
    }
}

/// Chat-completions client.
pub struct HttpProvider {
    config: HttpProviderConfig,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl HttpProvider {
    pub fn new(config: HttpProviderConfig) -> Self {
        let api_key = config
            .api_key_env
            .as_deref()
            .and_then(|var| std::env::var(var).ok());
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            config,
            api_key,
            agent,
        }
    }

    fn body(&self, request: &ChatRequest) -> Value {
        let mut body = json!({
            "model": self.config.model,
            "messages": request.messages,
        });
        let obj = body.as_object_mut().expect("object literal");
        if !request.tools.is_empty() {
            obj.insert("tools".into(), Value::Array(request.tools.clone()));
        }
        if let Some(t) = request.temperature {
            obj.insert("temperature".into(), json!(t));
        }
        if let Some(m) = request.max_tokens {
            obj.insert("max_tokens".into(), json!(m));
        }
        if let Some(s) = request.seed {
            obj.insert("seed".into(), json!(s));
        }
        body
    }

    fn send_once(&self, role: Role, body: &Value) -> Result<ChatResponse, Attempt> {
        let url = format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'));
        let mut call = self.agent.post(&url);
        if let Some(key) = &self.api_key {
            call = call.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = call.send_json(body).map_err(|e| {
            Attempt::Retry(GatewayError::ProviderUnreachable {
                role: role.to_string(),
                detail: e.to_string(),
            })
        })?;
        let status = response.status().as_u16();
        let text = response.body_mut().read_to_string().map_err(|e| {
            Attempt::Retry(GatewayError::ProviderUnreachable {
                role: role.to_string(),
                detail: e.to_string(),
            })
        })?;
        match status {
            200..=299 => parse_completion(&text).map_err(Attempt::Fatal),
            429 | 500..=599 => Err(Attempt::Retry(GatewayError::ProviderUnreachable {
                role: role.to_string(),
                detail: format!("HTTP {status}: {text}"),
            })),
            _ => Err(Attempt::Fatal(GatewayError::MalformedResponse(format!(
                "HTTP {status}: {text}"
            )))),
        }
    }
}

enum Attempt {
    Retry(GatewayError),
    Fatal(GatewayError),
}

impl ChatProvider for HttpProvider {
    fn complete(&self, role: Role, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        let body = self.body(request);
        let mut attempt = 0;
        loop {
            match self.send_once(role, &body) {
                Ok(response) => return Ok(response),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(e)) => {
                    if attempt >= self.config.retries {
                        return Err(e);
                    }
                    attempt += 1;
                    log::warn!("{role} request failed ({e}); retry {attempt}");
                    std::thread::sleep(Duration::from_millis(200 * attempt as u64));
                }
            }
        }
    }
}

/// Maps a chat-completions response body onto [`ChatResponse`]. Tool-call
/// arguments that are not valid JSON are kept as strings so the curation
/// parser can count them as malformed.
pub(crate) fn parse_completion(text: &str) -> Result<ChatResponse, GatewayError> {
    let value: Value = serde_json::from_str(text)
        .map_err(|e| GatewayError::MalformedResponse(format!("response is not JSON: {e}")))?;
    let choice = value
        .get("choices")
        .and_then(|c| c.get(0))
        .ok_or_else(|| GatewayError::MalformedResponse("response has no choices".into()))?;
    let message = choice
        .get("message")
        .ok_or_else(|| GatewayError::MalformedResponse("choice has no message".into()))?;
    let text = message
        .get("content")
        .and_then(Value::as_str)
        .unwrap_or_default()
        .to_string();
    let mut tool_calls = Vec::new();
    if let Some(calls) = message.get("tool_calls").and_then(Value::as_array) {
        for call in calls {
            let function = call.get("function").unwrap_or(call);
            let name = function
                .get("name")
                .and_then(Value::as_str)
                .ok_or_else(|| GatewayError::MalformedResponse("tool call without a name".into()))?;
            let arguments = match function.get("arguments") {
                Some(Value::String(raw)) => {
                    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.clone()))
                }
                Some(other) => other.clone(),
                None => json!({}),
            };
            tool_calls.push(ToolCall::new(name, arguments));
        }
    }
    let finish_reason = choice
        .get("finish_reason")
        .and_then(Value::as_str)
        .unwrap_or("stop")
        .to_string();
    Ok(ChatResponse {
        text,
        tool_calls,
        finish_reason,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_tool_calls_with_string_arguments() {
        let body = r#"{"choices":[{"message":{"content":null,"tool_calls":[
            {"id":"1","type":"function","function":{"name":"insert_skill","arguments":"{\"name\":\"a\",\"description\":\"d\",\"content\":\"c\"}"}},
            {"id":"2","type":"function","function":{"name":"delete_skill","arguments":"{broken"}}
        ]},"finish_reason":"tool_calls"}]}"#;
        let response = parse_completion(body).unwrap();
        assert_eq!(response.text, "");
        assert_eq!(response.finish_reason, "tool_calls");
        assert_eq!(response.tool_calls[0].arguments["content"], "c");
        assert_eq!(response.tool_calls[1].arguments, Value::String("{broken".into()));
    }

    #[test]
    fn rejects_bodies_without_choices() {
        assert!(matches!(
            parse_completion(r#"{"error":"x"}"#),
            Err(GatewayError::MalformedResponse(_))
        ));
        assert!(matches!(parse_completion("<html>"), Err(GatewayError::MalformedResponse(_))));
    }
}
