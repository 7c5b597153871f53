//! Curator tool calls: parsing, validation, and application to a repository.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::skill_store::{normalize_name, Skill, SkillRepo};

pub const INSERT_SKILL: &str = "insert_skill";
pub const UPDATE_SKILL: &str = "update_skill";
pub const DELETE_SKILL: &str = "delete_skill";

/// One tool call as it arrives from a model provider.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolCall {
    pub function_name: String,
    pub arguments: Value,
}

impl ToolCall {
    pub fn new(function_name: impl Into<String>, arguments: Value) -> Self {
        Self {
            function_name: function_name.into(),
            arguments,
        }
    }
}

/// Argument keys used by the three curation tools.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArgumentKeys {
    pub name: String,
    pub description: String,
    pub content: String,
}

impl Default for ArgumentKeys {
    fn default() -> Self {
        Self {
            name: "name".into(),
            description: "description".into(),
            content: "content".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum CurationOp {
    Insert {
        name: String,
        description: String,
        body: String,
    },
    Update {
        name: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        description: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        body: Option<String>,
    },
    Delete {
        name: String,
    },
}

impl CurationOp {
    pub fn name(&self) -> &str {
        match self {
            CurationOp::Insert { name, .. }
            | CurationOp::Update { name, .. }
            | CurationOp::Delete { name } => name,
        }
    }

    pub fn kind(&self) -> OpKind {
        match self {
            CurationOp::Insert { .. } => OpKind::Insert,
            CurationOp::Update { .. } => OpKind::Update,
            CurationOp::Delete { .. } => OpKind::Delete,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpKind {
    Insert,
    Update,
    Delete,
}

/// A tool call that could not be turned into an operation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallFailure {
    pub reason: String,
}

/// The ordered operations one curator response asked for.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurationDecision {
    pub raw_text: String,
    pub ops: Vec<CurationOp>,
    pub failures: Vec<CallFailure>,
}

impl CurationDecision {
    pub fn parse_failures(&self) -> usize {
        self.failures.len()
    }

    /// Total calls the curator emitted, malformed ones included.
    pub fn total_calls(&self) -> usize {
        self.ops.len() + self.failures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.total_calls() == 0
    }

    /// Builds a decision from structured tool calls.
    pub fn from_tool_calls(raw_text: impl Into<String>, calls: &[ToolCall]) -> Self {
        Self::from_tool_calls_with(raw_text, calls, &ArgumentKeys::default())
    }

    pub fn from_tool_calls_with(
        raw_text: impl Into<String>,
        calls: &[ToolCall],
        keys: &ArgumentKeys,
    ) -> Self {
        let mut decision = CurationDecision {
            raw_text: raw_text.into(),
            ..Default::default()
        };
        for call in calls {
            decision.push(op_from_call(&call.function_name, &call.arguments, keys));
        }
        decision
    }

    fn push(&mut self, parsed: Result<CurationOp, String>) {
        match parsed {
            Ok(op) => self.ops.push(op),
            Err(reason) => self.failures.push(CallFailure { reason }),
        }
    }
}

/// Parses a raw curator response.
///
/// Tool calls are read from `<tool_call>…</tool_call>` blocks, each holding
/// a JSON object `{"name": …, "arguments": {…}}` (`function_name` is accepted
/// in place of `name`, and `arguments` may be a JSON-encoded string). When the
/// response has no such blocks but is itself a JSON object or array of call
/// objects, that is used instead. Unparseable payloads, unknown function
/// names and missing arguments are counted as failures, never errors.
pub fn parse_decision(raw: &str) -> CurationDecision {
    parse_decision_with(raw, &ArgumentKeys::default())
}

pub fn parse_decision_with(raw: &str, keys: &ArgumentKeys) -> CurationDecision {
    let mut decision = CurationDecision {
        raw_text: raw.to_string(),
        ..Default::default()
    };

    let blocks = tool_call_blocks(raw);
    if blocks.is_empty() {
        if let Ok(value) = serde_json::from_str::<Value>(raw.trim()) {
            let items = match value {
                Value::Array(items) => items,
                obj @ Value::Object(_) => vec![obj],
                _ => Vec::new(),
            };
            for item in items {
                if looks_like_call(&item) {
                    decision.push(call_from_value(&item, keys));
                }
            }
        }
        return decision;
    }

    for block in blocks {
        let parsed = match block {
            Some(payload) => serde_json::from_str::<Value>(payload.trim())
                .map_err(|e| format!("malformed tool call payload: {e}"))
                .and_then(|value| call_from_value(&value, keys)),
            None => Err("unterminated <tool_call> block".to_string()),
        };
        decision.push(parsed);
    }
    decision
}

// `None` marks an opening tag with no closing tag.
fn tool_call_blocks(raw: &str) -> Vec<Option<&str>> {
    const OPEN: &str = "<tool_call>";
    const CLOSE: &str = "</tool_call>";
    let mut blocks = Vec::new();
    let mut rest = raw;
    while let Some(start) = rest.find(OPEN) {
        let after = &rest[start + OPEN.len()..];
        match after.find(CLOSE) {
            Some(end) => {
                blocks.push(Some(&after[..end]));
                rest = &after[end + CLOSE.len()..];
            }
            None => {
                blocks.push(None);
                break;
            }
        }
    }
    blocks
}

fn looks_like_call(value: &Value) -> bool {
    value
        .as_object()
        .is_some_and(|obj| obj.contains_key("name") || obj.contains_key("function_name"))
}

fn call_from_value(value: &Value, keys: &ArgumentKeys) -> Result<CurationOp, String> {
    let obj = value
        .as_object()
        .ok_or_else(|| "tool call is not a JSON object".to_string())?;
    let name = obj
        .get("function_name")
        .or_else(|| obj.get("name"))
        .and_then(Value::as_str)
        .ok_or_else(|| "tool call has no function name".to_string())?;
    let empty = Value::Object(Map::new());
    let arguments = obj.get("arguments").unwrap_or(&empty);
    op_from_call(name, arguments, keys)
}

fn op_from_call(function: &str, arguments: &Value, keys: &ArgumentKeys) -> Result<CurationOp, String> {
    let decoded;
    let arguments = match arguments {
        Value::String(text) => {
            decoded = serde_json::from_str::<Value>(text)
                .map_err(|e| format!("malformed arguments for {function}: {e}"))?;
            &decoded
        }
        other => other,
    };
    let args = arguments
        .as_object()
        .ok_or_else(|| format!("arguments for {function} are not a JSON object"))?;

    let string_arg = |key: &str| -> Result<Option<String>, String> {
        match args.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(_) => Err(format!("argument `{key}` of {function} must be a string")),
        }
    };
    let required = |key: &str| -> Result<String, String> {
        string_arg(key)?.ok_or_else(|| format!("{function} is missing required argument `{key}`"))
    };

    match function {
        INSERT_SKILL => Ok(CurationOp::Insert {
            name: required(&keys.name)?,
            description: required(&keys.description)?,
            body: required(&keys.content)?,
        }),
        UPDATE_SKILL => {
            let name = required(&keys.name)?;
            let description = string_arg(&keys.description)?;
            let body = string_arg(&keys.content)?;
            if description.is_none() && body.is_none() {
                return Err(format!(
                    "{function} needs `{}` or `{}`",
                    keys.description, keys.content
                ));
            }
            Ok(CurationOp::Update {
                name,
                description,
                body,
            })
        }
        DELETE_SKILL => Ok(CurationOp::Delete {
            name: required(&keys.name)?,
        }),
        other => Err(format!("unknown function `{other}`")),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", content = "detail", rename_all = "snake_case")]
pub enum RejectReason {
    AlreadyExists,
    NotFound,
    InvalidSkill(String),
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum OpOutcome {
    Applied,
    Rejected { reason: RejectReason },
}

impl OpOutcome {
    pub fn is_applied(&self) -> bool {
        matches!(self, OpOutcome::Applied)
    }
}

/// Outcome of applying one decision. Outcomes follow `decision.ops` in
/// order, then one `Malformed` rejection per parse failure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApplyReport {
    pub outcomes: Vec<OpOutcome>,
    pub repo: SkillRepo,
}

impl ApplyReport {
    pub fn applied(&self) -> usize {
        self.outcomes.iter().filter(|o| o.is_applied()).count()
    }
}

/// Applies one operation to `repo` in place.
pub fn apply_op(repo: &mut SkillRepo, op: &CurationOp) -> OpOutcome {
    let reject = |reason| OpOutcome::Rejected { reason };
    let name = match normalize_name(op.name()) {
        Ok(name) => name,
        Err(e) => return reject(RejectReason::InvalidSkill(e.to_string())),
    };
    match op {
        CurationOp::Insert {
            description, body, ..
        } => {
            if repo.contains(&name) {
                return reject(RejectReason::AlreadyExists);
            }
            match Skill::new(&name, description.clone(), body.clone()) {
                Ok(skill) => {
                    repo.put(skill);
                    OpOutcome::Applied
                }
                Err(e) => reject(RejectReason::InvalidSkill(e.to_string())),
            }
        }
        CurationOp::Update {
            description, body, ..
        } => {
            let Some(existing) = repo.get(&name) else {
                return reject(RejectReason::NotFound);
            };
            let mut updated = existing.clone();
            if let Some(description) = description {
                if let Err(e) = updated.set_description(description.clone()) {
                    return reject(RejectReason::InvalidSkill(e.to_string()));
                }
            }
            if let Some(body) = body {
                updated.set_body(body.clone());
            }
            *repo.get_mut(&name).expect("checked above") = updated;
            OpOutcome::Applied
        }
        CurationOp::Delete { .. } => {
            if repo.remove(&name).is_some() {
                OpOutcome::Applied
            } else {
                reject(RejectReason::NotFound)
            }
        }
    }
}

/// Applies a decision's operations left to right against an evolving copy
/// of `repo`. The revision advances once if any operation was applied.
pub fn apply_ops(repo: &SkillRepo, decision: &CurationDecision) -> ApplyReport {
    let mut next = repo.clone();
    let mut outcomes: Vec<OpOutcome> = decision
        .ops
        .iter()
        .map(|op| apply_op(&mut next, op))
        .collect();
    outcomes.extend(decision.failures.iter().map(|f| OpOutcome::Rejected {
        reason: RejectReason::Malformed(f.reason.clone()),
    }));
    if outcomes.iter().any(OpOutcome::is_applied) {
        next.bump_revision();
    }
    ApplyReport {
        outcomes,
        repo: next,
    }
}

/// Fraction of emitted calls that were valid and applied; 1.0 when the
/// curator emitted nothing.
pub fn validity_fraction(report: &ApplyReport) -> f64 {
    if report.outcomes.is_empty() {
        1.0
    } else {
        report.applied() as f64 / report.outcomes.len() as f64
    }
}
