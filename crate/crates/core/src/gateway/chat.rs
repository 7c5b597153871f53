use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::GatewayError;
use crate::curation::ToolCall;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Executor,
    Curator,
    Judge,
    Annotator,
}

impl Role {
    pub const ALL: [Role; 4] = [Role::Executor, Role::Curator, Role::Judge, Role::Annotator];

    pub fn as_str(&self) -> &'static str {
        match self {
            Role::Executor => "executor",
            Role::Curator => "curator",
            Role::Judge => "judge",
            Role::Annotator => "annotator",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Role::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| format!("unknown role `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: String,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: "system".into(),
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: "user".into(),
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub messages: Vec<Message>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tools: Vec<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ChatRequest {
    pub fn new(messages: Vec<Message>) -> Self {
        Self {
            messages,
            ..Default::default()
        }
    }

    pub fn with_tools(mut self, tools: Vec<Value>) -> Self {
        self.tools = tools;
        self
    }

    /// All message contents joined, in order.
    pub fn full_text(&self) -> String {
        self.messages
            .iter()
            .map(|m| m.content.as_str())
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tool_calls: Vec<ToolCall>,
    #[serde(default = "default_finish_reason")]
    pub finish_reason: String,
}

fn default_finish_reason() -> String {
    "stop".into()
}

impl ChatResponse {
    pub fn text(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            tool_calls: Vec::new(),
            finish_reason: default_finish_reason(),
        }
    }
}

pub trait ChatProvider: Send + Sync {
    fn complete(&self, role: Role, request: &ChatRequest) -> Result<ChatResponse, GatewayError>;
}

impl<P: ChatProvider + ?Sized> ChatProvider for std::sync::Arc<P> {
    fn complete(&self, role: Role, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        (**self).complete(role, request)
    }
}

/// Replay key: SHA-256 over the role and the ordered (role, content)
/// message pairs. Tools and decoding parameters are not part of the key.
pub fn request_hash(role: Role, request: &ChatRequest) -> String {
    let messages: Vec<[&str; 2]> = request
        .messages
        .iter()
        .map(|m| [m.role.as_str(), m.content.as_str()])
        .collect();
    let canonical = serde_json::json!({ "role": role.as_str(), "messages": messages });
    let digest = Sha256::digest(canonical.to_string().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// One line of a fixture file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureRecord {
    pub role: Role,
    pub request_hash: String,
    pub request: ChatRequest,
    pub response: ChatResponse,
}

impl FixtureRecord {
    pub fn new(role: Role, request: &ChatRequest, response: &ChatResponse) -> Self {
        Self {
            role,
            request_hash: request_hash(role, request),
            request: request.clone(),
            response: response.clone(),
        }
    }
}

/// Answers requests from recorded fixtures.
#[derive(Debug, Default)]
pub struct ReplayProvider {
    fixtures: HashMap<(Role, String), ChatResponse>,
}

impl ReplayProvider {
    pub fn from_records(records: impl IntoIterator<Item = FixtureRecord>) -> Self {
        let mut fixtures = HashMap::new();
        for record in records {
            fixtures
                .entry((record.role, record.request_hash))
                .or_insert(record.response);
        }
        Self { fixtures }
    }

    /// Reads a JSONL fixture file. The stored hash is trusted as the key.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, GatewayError> {
        let path = path.as_ref();
        let file = fs::File::open(path)
            .map_err(|e| GatewayError::Fixture(format!("{}: {e}", path.display())))?;
        let mut records = Vec::new();
        for (idx, line) in BufReader::new(file).lines().enumerate() {
            let line =
                line.map_err(|e| GatewayError::Fixture(format!("{}: {e}", path.display())))?;
            if line.trim().is_empty() {
                continue;
            }
            let record: FixtureRecord = serde_json::from_str(&line).map_err(|e| {
                GatewayError::Fixture(format!("{}:{}: {e}", path.display(), idx + 1))
            })?;
            records.push(record);
        }
        Ok(Self::from_records(records))
    }

    pub fn len(&self) -> usize {
        self.fixtures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fixtures.is_empty()
    }
}

impl ChatProvider for ReplayProvider {
    fn complete(&self, role: Role, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        let hash = request_hash(role, request);
        self.fixtures
            .get(&(role, hash.clone()))
            .cloned()
            .ok_or_else(|| GatewayError::FixtureMiss {
                role: role.to_string(),
                hash,
            })
    }
}

/// Passes requests through and keeps every exchange as a fixture.
pub struct RecordingProvider<P> {
    inner: P,
    records: Mutex<Vec<FixtureRecord>>,
}

impl<P: ChatProvider> RecordingProvider<P> {
    pub fn new(inner: P) -> Self {
        Self {
            inner,
            records: Mutex::new(Vec::new()),
        }
    }

    pub fn records(&self) -> Vec<FixtureRecord> {
        self.records.lock().expect("recorder lock poisoned").clone()
    }

    pub fn write_jsonl(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        let mut out = fs::File::create(path)?;
        for record in self.records() {
            writeln!(out, "{}", serde_json::to_string(&record)?)?;
        }
        Ok(())
    }
}

impl<P: ChatProvider> ChatProvider for RecordingProvider<P> {
    fn complete(&self, role: Role, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        let response = self.inner.complete(role, request)?;
        self.records
            .lock()
            .expect("recorder lock poisoned")
            .push(FixtureRecord::new(role, request, &response));
        Ok(response)
    }
}

type ScriptFn = dyn Fn(Role, &ChatRequest) -> Result<ChatResponse, GatewayError> + Send + Sync;

/// Answers every request through a closure.
pub struct ScriptedProvider {
    script: Box<ScriptFn>,
}

impl ScriptedProvider {
    pub fn new<F>(script: F) -> Self
    where
        F: Fn(Role, &ChatRequest) -> Result<ChatResponse, GatewayError> + Send + Sync + 'static,
    {
        Self {
            script: Box::new(script),
        }
    }

    /// Always returns `text`.
    pub fn constant(text: impl Into<String>) -> Self {
        let text = text.into();
        Self::new(move |_, _| Ok(ChatResponse::text(text.clone())))
    }
}

impl ChatProvider for ScriptedProvider {
    fn complete(&self, role: Role, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        (self.script)(role, request)
    }
}
