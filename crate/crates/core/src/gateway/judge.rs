use std::sync::OnceLock;

use regex::Regex;
use serde_json::Value;

use super::{ChatProvider, ChatRequest, GatewayError, Message, Role};
use crate::curation::{CurationDecision, CurationOp};
use crate::prompts::PromptSet;

fn number_pattern() -> &'static Regex {
    static PATTERN: OnceLock<Regex> = OnceLock::new();
    PATTERN.get_or_init(|| Regex::new(r"-?\d+(?:\.\d+)?").expect("valid regex"))
}

/// Reads the first number in a judge reply and maps it to `[0, 1]`.
///
/// Decimals are taken as already on the unit scale; bare integers 1-5 are
/// mapped linearly (`(n - 1) / 4`) and a bare `0` is 0.0. Anything else
/// (no number, decimals outside `[0, 1]`, integers above 5) is `None`.
pub fn parse_judge_score(text: &str) -> Option<f64> {
    let token = number_pattern().find(text)?.as_str();
    let value: f64 = token.parse().ok()?;
    if token.contains('.') {
        (0.0..=1.0).contains(&value).then_some(value)
    } else {
        match value as i64 {
            0 => Some(0.0),
            n @ 1..=5 => Some((n - 1) as f64 / 4.0),
            _ => None,
        }
    }
}

fn render_edits(decision: &CurationDecision) -> String {
    let mut lines = Vec::new();
    for op in &decision.ops {
        lines.push(match op {
            CurationOp::Insert {
                name,
                description,
                body,
            } => format!("insert_skill {name}\ndescription: {description}\n{body}"),
            CurationOp::Update {
                name,
                description,
                body,
            } => {
                let mut s = format!("update_skill {name}");
                if let Some(d) = description {
                    s.push_str(&format!("\ndescription: {d}"));
                }
                if let Some(b) = body {
                    s.push('\n');
                    s.push_str(b);
                }
                s
            }
            CurationOp::Delete { name } => format!("delete_skill {name}"),
        });
    }
    for failure in &decision.failures {
        lines.push(format!("invalid call: {}", failure.reason));
    }
    lines.join("\n\n")
}

pub fn judge_request(prompts: &PromptSet, decision: &CurationDecision, summary: &str) -> ChatRequest {
    let edits = render_edits(decision);
    let prompt = prompts.render_or(
        "judge/content",
        "judge/content",
        &[("trajectory", summary), ("edits", &edits)],
    );
    ChatRequest::new(vec![Message::user(prompt)])
}

/// Asks the judge to score a decision. A reply without a usable score is
/// retried once; a second failure scores 0.0. Transport errors propagate.
pub fn judge_score(
    provider: &dyn ChatProvider,
    prompts: &PromptSet,
    decision: &CurationDecision,
    summary: &str,
) -> Result<f64, GatewayError> {
    let request = judge_request(prompts, decision, summary);
    for attempt in 0..2 {
        let reply = provider.complete(Role::Judge, &request)?;
        if let Some(score) = parse_judge_score(&reply.text) {
            return Ok(score);
        }
        log::warn!(
            "judge reply {:?} has no usable score (attempt {})",
            reply.text,
            attempt + 1
        );
    }
    Ok(0.0)
}

/// Maps a verdict reply to success. The last SUCCESS/FAILURE word wins;
/// replies with neither count as failure.
pub fn parse_verdict(text: &str) -> bool {
    let upper = text.to_uppercase();
    let words: Vec<&str> = upper
        .split(|c: char| !c.is_ascii_alphabetic())
        .filter(|w| *w == "SUCCESS" || *w == "FAILURE")
        .collect();
    words.last().is_some_and(|w| *w == "SUCCESS")
}

pub fn self_judge_success(
    provider: &dyn ChatProvider,
    request: &ChatRequest,
) -> Result<bool, GatewayError> {
    let reply = provider.complete(Role::Executor, request)?;
    Ok(parse_verdict(&reply.text))
}

/// Pulls the outermost `{...}` span out of a reply and parses it.
pub fn extract_json_object(text: &str) -> Option<Value> {
    let start = text.find('{')?;
    let end = text.rfind('}')?;
    if end < start {
        return None;
    }
    serde_json::from_str(&text[start..=end])
        .ok()
        .filter(Value::is_object)
}

/// Runs the annotator on one task and returns the raw JSON annotation.
pub fn annotate(
    provider: &dyn ChatProvider,
    prompts: &PromptSet,
    task_text: &str,
) -> Result<Value, GatewayError> {
    let prompt = prompts.render_or("annotator/system", "annotator/system", &[("task", task_text)]);
    let reply = provider.complete(Role::Annotator, &ChatRequest::new(vec![Message::user(prompt)]))?;
    extract_json_object(&reply.text).ok_or_else(|| {
        GatewayError::MalformedResponse(format!("annotator reply has no JSON object: {:?}", reply.text))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{ChatResponse, ScriptedProvider};
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    #[test]
    fn score_scales() {
        assert_eq!(parse_judge_score("4"), Some(0.75));
        assert_eq!(parse_judge_score("Score: 5/5"), Some(1.0));
        assert_eq!(parse_judge_score("1"), Some(0.0));
        assert_eq!(parse_judge_score("0.9"), Some(0.9));
        assert_eq!(parse_judge_score("0"), Some(0.0));
        assert_eq!(parse_judge_score("1.0"), Some(1.0));
        assert_eq!(parse_judge_score("7"), None);
        assert_eq!(parse_judge_score("2.5"), None);
        assert_eq!(parse_judge_score("great work"), None);
    }

    #[test]
    fn judge_retries_once_then_zero() {
        let calls = Arc::new(AtomicUsize::new(0));
        let counter = Arc::clone(&calls);
        let provider = ScriptedProvider::new(move |_, _| {
            counter.fetch_add(1, Ordering::SeqCst);
            Ok(ChatResponse::text("no idea"))
        });
        let score =
            judge_score(&provider, &PromptSet::default(), &CurationDecision::default(), "s").unwrap();
        assert_eq!(score, 0.0);
        assert_eq!(calls.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn judge_second_attempt_can_succeed() {
        let calls = Arc::new(AtomicUsize::new(0));
        let counter = Arc::clone(&calls);
        let provider = ScriptedProvider::new(move |_, _| {
            let n = counter.fetch_add(1, Ordering::SeqCst);
            Ok(ChatResponse::text(if n == 0 { "hmm" } else { "0.9" }))
        });
        let score =
            judge_score(&provider, &PromptSet::default(), &CurationDecision::default(), "s").unwrap();
        assert_eq!(score, 0.9);
    }

    #[test]
    fn verdicts() {
        assert!(parse_verdict("SUCCESS"));
        assert!(!parse_verdict("FAILURE"));
        assert!(!parse_verdict("asdf qwerty"));
        assert!(parse_verdict("The agent succeeded. Verdict: success"));
        assert!(!parse_verdict("SUCCESS or FAILURE? I'd say FAILURE."));
    }

    #[test]
    fn json_extraction() {
        let v = extract_json_object("Here you go:\n```json\n{\"topics\": [\"algebra\"]}\n```").unwrap();
        assert_eq!(v["topics"][0], "algebra");
        assert!(extract_json_object("no json").is_none());
    }
}
