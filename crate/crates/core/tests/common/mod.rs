//! Fixtures shared by the integration test targets.
#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use skillrepo::gateway::{ChatResponse, ScriptedProvider, StubEmbedder};
use skillrepo::grouping::{AnnotatedTask, AttributeSet, Corpus};
use skillrepo::harness::{Clients, EnvironmentKind, Harness, HarnessParams, StreamTask};
use skillrepo::prompts::PromptSet;

pub fn fixture(path: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(path)
}

/// Small prompt overrides whose token counts are easy to work out by hand.
pub fn prompts() -> PromptSet {
    PromptSet::load_overrides(fixture("prompts")).expect("fixture prompts load")
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

pub fn task(id: &str, difficulty: f64, attrs: [&[&str]; 5]) -> AnnotatedTask {
    let [concepts, skills, strategies, pitfalls, topics] = attrs;
    AnnotatedTask {
        id: id.into(),
        text: format!("task {id}"),
        difficulty,
        attributes: AttributeSet {
            topics: strings(topics),
            skills: strings(skills),
            concepts: strings(concepts),
            strategies: strings(strategies),
            pitfalls: strings(pitfalls),
        },
    }
}

const LEVELS: [f64; 5] = [0.0, 0.2, 1.0, 1.9, 3.5];

/// Four families of five tasks. Family members share a core concept, a
/// core skill and a strategy; member 2 also borrows the next family's core
/// concept; members 3 and 4 of family 0 share a topic; member 4 of family 1
/// adds nothing beyond the family core; the odd members of family 3 use
/// aliased phrasings that only match semantically.
pub fn toy_corpus() -> Corpus {
    let mut tasks = Vec::new();
    for f in 0..4usize {
        for (i, level) in LEVELS.iter().enumerate() {
            let alt = f == 3 && i % 2 == 1;
            let core = if alt { "core concept 3 alt".to_string() } else { format!("core concept {f}") };
            let strategy = if alt { "strategy 3 alt".to_string() } else { format!("strategy {f}") };
            let mut concepts = vec![core, format!("concept {f} {i}")];
            if i == 2 {
                concepts.push(format!("core concept {}", (f + 1) % 4));
            }
            let topic = if f == 0 && i == 4 { "topic 0 3".to_string() } else { format!("topic {f} {i}") };
            let plain = f == 1 && i == 4;
            if plain {
                concepts.truncate(1);
            }
            let mut skills = vec![format!("core skill {f}"), format!("skill {f} {i}")];
            if plain {
                skills.truncate(1);
            }
            tasks.push(AnnotatedTask {
                id: format!("t{:02}", f * 5 + i),
                text: format!("family {f} member {i}"),
                difficulty: level + 0.05 * f as f64,
                attributes: AttributeSet {
                    topics: vec![topic],
                    skills,
                    concepts,
                    strategies: vec![strategy],
                    pitfalls: vec![format!("pitfall {f} {i}")],
                },
            });
        }
    }
    Corpus::new(tasks).expect("unique ids")
}

pub fn toy_embedder() -> StubEmbedder {
    StubEmbedder::default()
        .with_alias("core concept 3 alt", "core concept 3", 0.8)
        .with_alias("strategy 3 alt", "strategy 3", 0.8)
}

/// The only admissible successor of `a` shares no exact phrase with it.
pub fn fuzzy_only_corpus() -> Corpus {
    Corpus::new(vec![
        task(
            "a",
            0.0,
            [&["pigeonhole principle"], &["counting"], &["case analysis"], &["off by one"], &["combinatorics"]],
        ),
        task(
            "b",
            1.5,
            [
                &["counting argument", "parity"],
                &["counting", "bijection"],
                &["split into cases"],
                &["double counting"],
                &["number theory"],
            ],
        ),
        task(
            "c",
            1.0,
            [&["graph coloring"], &["drawing"], &["greedy"], &["overlap"], &["graphs"]],
        ),
    ])
    .expect("unique ids")
}

pub fn fuzzy_only_embedder() -> StubEmbedder {
    StubEmbedder::default()
        .with_alias("counting argument", "pigeonhole principle", 0.75)
        .with_alias("split into cases", "case analysis", 0.8)
}

fn after_prefix<'a>(text: &'a str, prefix: &str) -> Option<&'a str> {
    text.lines().find_map(|l| l.strip_prefix(prefix))
}

/// Executor that always tries `action`; as self-judge it says SUCCESS
/// exactly when the task text mentions `success_word`.
pub fn scripted_executor(action: &'static str, success_word: &'static str) -> ScriptedProvider {
    ScriptedProvider::new(move |_, request| {
        let text = request.full_text();
        let reply = match after_prefix(&text, "Judge: ") {
            Some(task) if task.contains(success_word) => "SUCCESS".to_string(),
            Some(_) => "FAILURE".to_string(),
            None => format!("I will try this.\n<action>{action}</action>"),
        };
        Ok(ChatResponse::text(reply))
    })
}

/// Curator answering per task with the reply listed for it; unlisted tasks
/// get a reply with no tool calls.
pub fn scripted_curator(replies: Vec<(&'static str, String)>) -> ScriptedProvider {
    ScriptedProvider::new(move |_, request| {
        let text = request.full_text();
        let task = after_prefix(&text, "Task: ").unwrap_or_default();
        let reply = replies
            .iter()
            .find(|(t, _)| *t == task)
            .map_or("Nothing worth keeping.".to_string(), |(_, r)| r.clone());
        Ok(ChatResponse::text(reply))
    })
}

pub fn tool_call(name: &str, arguments: serde_json::Value) -> String {
    format!(
        "<tool_call>{}</tool_call>",
        serde_json::json!({ "name": name, "arguments": arguments })
    )
}

pub fn golden_tasks() -> Vec<StreamTask> {
    vec![
        StreamTask::new("door-red", "open the red door").with_solution(["open door"]),
        StreamTask::new("door-blue", "open the blue door").with_solution(["open door"]),
        StreamTask::new("chest", "unlock the chest").with_solution(["use key", "open chest"]),
    ]
}

pub fn golden_params() -> HarnessParams {
    HarnessParams {
        max_turns: 3,
        ..HarnessParams::default()
    }
}

/// Three-task group: position 1 inserts a skill, position 2 updates it and
/// emits one malformed call, position 3 emits nothing.
pub fn golden_harness(params: HarnessParams) -> Harness {
    harness_with(golden_clients(), EnvironmentKind::TextMaze, params)
}

pub fn harness_with(clients: Clients, env: EnvironmentKind, params: HarnessParams) -> Harness {
    Harness::new(clients, Arc::new(env), params).with_prompts(prompts())
}

pub fn golden_clients() -> Clients {
    let curator = scripted_curator(vec![
        (
            "open the red door",
            tool_call(
                "insert_skill",
                serde_json::json!({
                    "name": "open-doors",
                    "description": "use when a door blocks the way",
                    "content": "Say open door."
                }),
            ),
        ),
        (
            "open the blue door",
            format!(
                "{}\n{}",
                tool_call(
                    "update_skill",
                    serde_json::json!({"name": "open-doors", "content": "Say open door, then step through."}),
                ),
                tool_call("rename_skill", serde_json::json!({"name": "open-doors"})),
            ),
        ),
    ]);
    Clients {
        executor: Arc::new(scripted_executor("open door", "door")),
        curator: Arc::new(curator),
        judge: Arc::new(ScriptedProvider::constant("Score: 4")),
    }
}

/// Five-task stream: inserts at positions 1 and 2, an update at 4, and a
/// delete of a missing skill at 5. Tasks 2 and 5 are unsolvable.
pub fn metrics_tasks() -> Vec<StreamTask> {
    vec![
        StreamTask::new("s1", "sort the alpha crates").with_solution(["done"]).with_subset("crates"),
        StreamTask::new("s2", "water the fern").with_solution(["other"]).with_subset("crates"),
        StreamTask::new("s3", "move alpha crates").with_solution(["done"]).with_subset("crates"),
        StreamTask::new("s4", "feed the cat").with_solution(["done"]).with_subset("pets"),
        StreamTask::new("s5", "stack alpha boxes").with_solution(["other"]).with_subset("pets"),
    ]
}

pub fn metrics_harness() -> Harness {
    let curator = scripted_curator(vec![
        (
            "sort the alpha crates",
            tool_call(
                "insert_skill",
                serde_json::json!({"name": "alpha-skill", "description": "use for alpha crates", "content": "Stack alpha crates by size."}),
            ),
        ),
        (
            "water the fern",
            tool_call(
                "insert_skill",
                serde_json::json!({"name": "beta-skill", "description": "use for gamma pipes", "content": "Tighten gamma pipes."}),
            ),
        ),
        (
            "feed the cat",
            tool_call(
                "update_skill",
                serde_json::json!({"name": "alpha-skill", "content": "Stack alpha crates by size, heaviest first."}),
            ),
        ),
        ("stack alpha boxes", tool_call("delete_skill", serde_json::json!({"name": "ghost"}))),
    ]);
    let clients = Clients {
        executor: Arc::new(scripted_executor("done", "")),
        curator: Arc::new(curator),
        judge: Arc::new(ScriptedProvider::constant("5")),
    };
    let params = HarnessParams {
        metrics_bucket: 2,
        ..HarnessParams::default()
    };
    harness_with(clients, EnvironmentKind::SingleTurn, params)
}
