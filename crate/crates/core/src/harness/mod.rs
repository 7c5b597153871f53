//! Group rollouts for curator training, streaming evaluation, and the
//! usage metrics computed over a stream.
//!
//! Every position runs the same five steps: retrieve top-k skills for the
//! task, let the executor act in the environment, self-judge the outcome,
//! ask the curator for a decision, and apply it to the repository.

mod env;
mod metrics;
mod trace;

pub use env::{
    Environment, EnvironmentFactory, EnvironmentKind, SingleTurn, StepResult, StreamTask, TextMaze,
};
pub use metrics::{compute_metrics, OpBucket, OpProportions, StreamMetrics};
pub use trace::{
    parse_trace, read_trace, replay_rewards, rollout_trace_lines, stream_trace_lines, to_jsonl, write_jsonl,
    ReplayRow, RewardLine, TraceError, TraceLine,
};

use std::sync::{Arc, OnceLock};

use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curation::{apply_ops, parse_decision, validity_fraction, CurationDecision, OpOutcome};
use crate::gateway::{
    judge_score, parse_verdict, ChatProvider, ChatRequest, GatewayError, Message, Role,
};
use crate::policy::{group_advantages, PolicyError};
use crate::prompts::PromptSet;
use crate::retrieval::{Bm25Params, SkillIndex};
use crate::reward::{composite_reward_with, RewardBreakdown, RewardError, RewardSettings, TaskRecord};
use crate::skill_store::{repo_token_length, SkillRepo, TokenCounter, WhitespaceTokens};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("group has {0} tasks; at least 2 are required")]
    GroupTooSmall(usize),
    #[error("at least 2 rollouts are required, got {0}")]
    TooFewRollouts(usize),
    #[error("task stream is empty")]
    EmptyStream,
    #[error("position {position} (task `{task_id}`), {role}: {source}")]
    Provider {
        position: usize,
        task_id: String,
        role: Role,
        #[source]
        source: GatewayError,
    },
    #[error(transparent)]
    Reward(#[from] RewardError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("worker pool: {0}")]
    Pool(String),
}

impl HarnessError {
    pub fn is_provider_error(&self) -> bool {
        matches!(self, HarnessError::Provider { .. })
    }
}

/// Which success signal feeds the task-outcome reward.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuccessSource {
    #[default]
    Judge,
    Environment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarnessParams {
    pub top_k: usize,
    pub bm25: Bm25Params,
    pub max_turns: usize,
    pub history_length: usize,
    /// Selects the `executor/<benchmark>` and `self_judge/<benchmark>`
    /// templates.
    pub benchmark: String,
    pub success_source: SuccessSource,
    /// Content score given to a decision with no tool calls (the judge is
    /// not consulted).
    pub empty_decision_score: f64,
    pub rollouts: usize,
    pub jobs: usize,
    pub reward: RewardSettings,
    /// Stream positions per op-proportion bucket.
    pub metrics_bucket: usize,
}

impl Default for HarnessParams {
    fn default() -> Self {
        Self {
            top_k: 5,
            bm25: Bm25Params::default(),
            max_turns: 30,
            history_length: 3,
            benchmark: "alfworld".into(),
            success_source: SuccessSource::Judge,
            empty_decision_score: 0.5,
            rollouts: 8,
            jobs: 1,
            reward: RewardSettings::default(),
            metrics_bucket: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub observation: String,
    pub action: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trajectory {
    pub steps: Vec<Step>,
    /// Ground-truth outcome reported by the environment.
    pub success: bool,
    pub step_count: usize,
}

impl Trajectory {
    pub fn render(&self) -> String {
        self.steps
            .iter()
            .map(|s| format!("Observation: {}\nAction: {}", s.observation, s.action))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// Everything recorded for one position of a group rollout or stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionTrace {
    pub group_id: String,
    pub rollout: usize,
    /// 1-based.
    pub position: usize,
    pub task_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subset: Option<String>,
    pub retrieved: Vec<String>,
    pub trajectory: Trajectory,
    pub judged_success: bool,
    pub decision: CurationDecision,
    pub outcomes: Vec<OpOutcome>,
    pub revision: u64,
    pub repo_size: usize,
    pub record: TaskRecord,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupRollout {
    pub group_id: String,
    pub rollout: usize,
    pub seed: u64,
    pub positions: Vec<PositionTrace>,
    pub reward: RewardBreakdown,
    pub final_repo: SkillRepo,
}

impl GroupRollout {
    pub fn records(&self) -> Vec<TaskRecord> {
        self.positions.iter().map(|p| p.record).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutGroup {
    pub rollouts: Vec<GroupRollout>,
    pub advantages: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamRun {
    pub positions: Vec<PositionTrace>,
    pub final_repo: SkillRepo,
    pub metrics: StreamMetrics,
}

/// Model clients for the three roles a rollout uses.
#[derive(Clone)]
pub struct Clients {
    pub executor: Arc<dyn ChatProvider>,
    pub curator: Arc<dyn ChatProvider>,
    pub judge: Arc<dyn ChatProvider>,
}

impl Clients {
    /// One provider serving every role.
    pub fn uniform(provider: Arc<dyn ChatProvider>) -> Self {
        Self {
            executor: Arc::clone(&provider),
            curator: Arc::clone(&provider),
            judge: provider,
        }
    }
}

fn action_pattern() -> &'static Regex {
    static PATTERN: OnceLock<Regex> = OnceLock::new();
    PATTERN.get_or_init(|| Regex::new(r"(?s)<action>(.*?)</action>").expect("valid regex"))
}

/// The last `<action>…</action>` block, or the whole reply when there is
/// none.
pub fn parse_action(reply: &str) -> String {
    action_pattern()
        .captures_iter(reply)
        .last()
        .map_or(reply, |c| c.get(1).map_or("", |m| m.as_str()))
        .trim()
        .to_string()
}

fn or_none(text: String) -> String {
    if text.is_empty() {
        "(none)".into()
    } else {
        text
    }
}

struct PositionContext<'a> {
    group_id: &'a str,
    rollout: usize,
    position: usize,
    seed: u64,
}

pub struct Harness {
    clients: Clients,
    environments: Arc<dyn EnvironmentFactory>,
    prompts: PromptSet,
    params: HarnessParams,
    counter: Arc<dyn TokenCounter>,
}

impl Harness {
    pub fn new(clients: Clients, environments: Arc<dyn EnvironmentFactory>, params: HarnessParams) -> Self {
        Self {
            clients,
            environments,
            prompts: PromptSet::default(),
            params,
            counter: Arc::new(WhitespaceTokens),
        }
    }

    pub fn with_prompts(mut self, prompts: PromptSet) -> Self {
        self.prompts = prompts;
        self
    }

    pub fn with_token_counter(mut self, counter: Arc<dyn TokenCounter>) -> Self {
        self.counter = counter;
        self
    }

    pub fn params(&self) -> &HarnessParams {
        &self.params
    }

    fn call(
        &self,
        provider: &dyn ChatProvider,
        role: Role,
        request: &ChatRequest,
        ctx: &PositionContext,
        task: &StreamTask,
    ) -> Result<String, HarnessError> {
        provider
            .complete(role, request)
            .map(|r| r.text)
            .map_err(|source| self.provider_error(role, ctx, task, source))
    }

    fn provider_error(&self, role: Role, ctx: &PositionContext, task: &StreamTask, source: GatewayError) -> HarnessError {
        HarnessError::Provider {
            position: ctx.position,
            task_id: task.id.clone(),
            role,
            source,
        }
    }

    fn executor_prompt(&self, task: &StreamTask, skills: &str, history: &[Step], observation: &str) -> String {
        let recent = &history[history.len().saturating_sub(self.params.history_length)..];
        let history_text = Trajectory {
            steps: recent.to_vec(),
            ..Default::default()
        }
        .render();
        let history_length = self.params.history_length.to_string();
        self.prompts.render_or(
            &format!("executor/{}", self.params.benchmark),
            "executor/alfworld",
            &[
                ("task", &task.text),
                ("skills", skills),
                ("history_length", &history_length),
                ("history", &or_none(history_text)),
                ("observation", observation),
            ],
        )
    }

    fn solve(&self, task: &StreamTask, skills: &str, ctx: &PositionContext) -> Result<Trajectory, HarnessError> {
        let mut env = self.environments.create(task);
        let mut observation = env.reset(task);
        let mut steps = Vec::new();
        for _ in 0..self.params.max_turns {
            let prompt = self.executor_prompt(task, skills, &steps, &observation);
            let mut request = ChatRequest::new(vec![Message::user(prompt)]);
            request.seed = Some(ctx.seed);
            let reply = self.call(self.clients.executor.as_ref(), Role::Executor, &request, ctx, task)?;
            let action = parse_action(&reply);
            let result = env.step(&action);
            steps.push(Step {
                observation: std::mem::replace(&mut observation, result.observation),
                action,
            });
            if result.done {
                break;
            }
        }
        Ok(Trajectory {
            step_count: steps.len(),
            success: env.success(),
            steps,
        })
    }

    fn self_judge(&self, task: &StreamTask, trajectory: &Trajectory, ctx: &PositionContext) -> Result<bool, HarnessError> {
        let prompt = self.prompts.render_or(
            &format!("self_judge/{}", self.params.benchmark),
            "self_judge/alfworld",
            &[("task", &task.text), ("trajectory", &trajectory.render())],
        );
        let mut request = ChatRequest::new(vec![Message::user(prompt)]);
        request.seed = Some(ctx.seed);
        let reply = self.call(self.clients.executor.as_ref(), Role::Executor, &request, ctx, task)?;
        Ok(parse_verdict(&reply))
    }

    fn run_position(
        &self,
        repo: &SkillRepo,
        task: &StreamTask,
        ctx: &PositionContext,
    ) -> Result<(PositionTrace, SkillRepo), HarnessError> {
        let index = SkillIndex::build_with(repo, self.params.bm25);
        let retrieved: Vec<String> = index
            .retrieve(&task.text, self.params.top_k)
            .into_iter()
            .map(|s| s.name)
            .collect();
        let skills_text = or_none(
            retrieved
                .iter()
                .filter_map(|name| repo.get(name))
                .map(|s| s.to_markdown())
                .collect::<Vec<_>>()
                .join("\n\n"),
        );

        let trajectory = self.solve(task, &skills_text, ctx)?;
        let judged_success = self.self_judge(task, &trajectory, ctx)?;
        let outcome = if judged_success { "SUCCESS" } else { "FAILURE" };

        let system = self
            .prompts
            .render_or("curator/system", "curator/system", &[("benchmark", &self.params.benchmark)]);
        let rendered_trajectory = trajectory.render();
        let user = self.prompts.render_or(
            "curator/user",
            "curator/user",
            &[
                ("task", &task.text),
                ("trajectory", &rendered_trajectory),
                ("outcome", outcome),
                ("skills", &skills_text),
            ],
        );
        let context_tokens = self.counter.count(&system) + self.counter.count(&user);
        let mut request = ChatRequest::new(vec![Message::system(system), Message::user(user)])
            .with_tools(self.prompts.curator_tools().to_vec());
        request.seed = Some(ctx.seed);
        let reply = self
            .clients
            .curator
            .complete(Role::Curator, &request)
            .map_err(|e| self.provider_error(Role::Curator, ctx, task, e))?;
        let decision = if reply.tool_calls.is_empty() {
            parse_decision(&reply.text)
        } else {
            CurationDecision::from_tool_calls(reply.text.clone(), &reply.tool_calls)
        };

        let report = apply_ops(repo, &decision);
        let judge = if decision.is_empty() {
            self.params.empty_decision_score
        } else {
            let summary = format!("Task: {}\n{}\nOutcome: {outcome}", task.text, rendered_trajectory);
            judge_score(self.clients.judge.as_ref(), &self.prompts, &decision, &summary)
                .map_err(|e| self.provider_error(Role::Judge, ctx, task, e))?
        };
        let record = TaskRecord {
            success: match self.params.success_source {
                SuccessSource::Judge => judged_success,
                SuccessSource::Environment => trajectory.success,
            },
            validity: validity_fraction(&report),
            judge_score: Some(judge),
            repo_tokens: repo_token_length(&report.repo, self.counter.as_ref()),
            context_tokens,
        };
        let trace = PositionTrace {
            group_id: ctx.group_id.to_string(),
            rollout: ctx.rollout,
            position: ctx.position,
            task_id: task.id.clone(),
            subset: task.subset.clone(),
            retrieved,
            trajectory,
            judged_success,
            decision,
            outcomes: report.outcomes,
            revision: report.repo.revision(),
            repo_size: report.repo.len(),
            record,
        };
        Ok((trace, report.repo))
    }

    fn run_sequence(
        &self,
        group_id: &str,
        rollout: usize,
        tasks: &[StreamTask],
        seed: u64,
    ) -> Result<(Vec<PositionTrace>, SkillRepo), HarnessError> {
        let mut repo = SkillRepo::new();
        let mut positions = Vec::with_capacity(tasks.len());
        for (i, task) in tasks.iter().enumerate() {
            let ctx = PositionContext {
                group_id,
                rollout,
                position: i + 1,
                seed,
            };
            let (trace, next) = self.run_position(&repo, task, &ctx)?;
            log::debug!(
                "{group_id}/{rollout} position {} task {}: {} ops, repo size {}",
                i + 1,
                task.id,
                trace.decision.ops.len(),
                next.len()
            );
            positions.push(trace);
            repo = next;
        }
        Ok((positions, repo))
    }

    /// One rollout over a task group, starting from an empty repository.
    pub fn run_group(
        &self,
        group_id: &str,
        tasks: &[StreamTask],
        rollout: usize,
        seed: u64,
    ) -> Result<GroupRollout, HarnessError> {
        if tasks.len() < 2 {
            return Err(HarnessError::GroupTooSmall(tasks.len()));
        }
        let (positions, final_repo) = self.run_sequence(group_id, rollout, tasks, seed)?;
        let records: Vec<TaskRecord> = positions.iter().map(|p| p.record).collect();
        let reward = composite_reward_with(&records, &self.params.reward)?;
        Ok(GroupRollout {
            group_id: group_id.to_string(),
            rollout,
            seed,
            positions,
            reward,
            final_repo,
        })
    }

    /// `n` independent rollouts of one group (rollout `i` uses seed
    /// `base_seed + i`) and their group-relative advantages. Up to
    /// `params.jobs` rollouts run at once.
    pub fn run_rollout_group(
        &self,
        group_id: &str,
        tasks: &[StreamTask],
        n: usize,
        base_seed: u64,
    ) -> Result<RolloutGroup, HarnessError> {
        if n < 2 {
            return Err(HarnessError::TooFewRollouts(n));
        }
        if tasks.len() < 2 {
            return Err(HarnessError::GroupTooSmall(tasks.len()));
        }
        let one = |i: usize| self.run_group(group_id, tasks, i, base_seed.wrapping_add(i as u64));
        let rollouts: Vec<GroupRollout> = if self.params.jobs <= 1 {
            (0..n).map(one).collect::<Result<_, _>>()?
        } else {
            rayon::ThreadPoolBuilder::new()
                .num_threads(self.params.jobs)
                .build()
                .map_err(|e| HarnessError::Pool(e.to_string()))?
                .install(|| (0..n).into_par_iter().map(one).collect::<Result<_, _>>())?
        };
        let totals: Vec<f64> = rollouts.iter().map(|r| r.reward.total).collect();
        let advantages = group_advantages(&totals)?;
        Ok(RolloutGroup {
            rollouts,
            advantages,
        })
    }

    /// Test-time streaming: one persistent repository across all tasks.
    pub fn run_stream(&self, tasks: &[StreamTask], seed: u64) -> Result<StreamRun, HarnessError> {
        if tasks.is_empty() {
            return Err(HarnessError::EmptyStream);
        }
        let (positions, final_repo) = self.run_sequence("stream", 0, tasks, seed)?;
        let metrics = compute_metrics(&positions, &final_repo, self.params.metrics_bucket);
        Ok(StreamRun {
            positions,
            final_repo,
            metrics,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{ChatResponse, ScriptedProvider};

    #[test]
    fn action_extraction() {
        assert_eq!(parse_action("<think>x</think><action> go north </action>"), "go north");
        assert_eq!(parse_action("<action>a</action> then <action>b</action>"), "b");
        assert_eq!(parse_action("  open door "), "open door");
    }

    fn silent_harness(executor_reply: &'static str, judge_verdict: &'static str) -> Harness {
        let provider = ScriptedProvider::new(move |role, req| {
            Ok(ChatResponse::text(match role {
                Role::Executor if req.full_text().contains("SUCCESS or FAILURE") => judge_verdict,
                Role::Executor => executor_reply,
                _ => "No changes needed.",
            }))
        });
        Harness::new(
            Clients::uniform(Arc::new(provider)),
            Arc::new(EnvironmentKind::TextMaze),
            HarnessParams::default(),
        )
    }

    #[test]
    fn silent_curator_keeps_repo_empty() {
        let harness = silent_harness("<action>go</action>", "SUCCESS");
        let tasks = vec![
            StreamTask::new("a", "walk").with_solution(["go"]),
            StreamTask::new("b", "walk again").with_solution(["go", "go"]),
        ];
        let rollout = harness.run_group("g", &tasks, 0, 7).unwrap();
        assert!(rollout.final_repo.is_empty());
        assert_eq!(rollout.reward.r_comp, 1.0);
        assert_eq!(rollout.reward.r_fc, 1.0);
        assert_eq!(rollout.reward.r_task, 1.0);
        assert_eq!(rollout.positions[1].trajectory.step_count, 2);
        assert!(rollout.positions.iter().all(|p| p.revision == 0));
    }

    #[test]
    fn turn_limit_caps_trajectory() {
        let mut harness = silent_harness("<action>wait</action>", "FAILURE");
        harness.params.max_turns = 4;
        let tasks = vec![
            StreamTask::new("a", "walk").with_solution(["go"]),
            StreamTask::new("b", "walk").with_solution(["go"]),
        ];
        let rollout = harness.run_group("g", &tasks, 0, 0).unwrap();
        let t = &rollout.positions[0].trajectory;
        assert_eq!((t.step_count, t.steps.len(), t.success), (4, 4, false));
    }

    #[test]
    fn single_task_group_rejected() {
        let harness = silent_harness("x", "SUCCESS");
        let err = harness.run_group("g", &[StreamTask::new("a", "t")], 0, 0).unwrap_err();
        assert!(matches!(err, HarnessError::GroupTooSmall(1)));
    }

    #[test]
    fn provider_errors_carry_position() {
        let provider = ScriptedProvider::new(|role, _| match role {
            Role::Curator => Err(GatewayError::MalformedResponse("boom".into())),
            _ => Ok(ChatResponse::text("<action>go</action> SUCCESS")),
        });
        let harness = Harness::new(
            Clients::uniform(Arc::new(provider)),
            Arc::new(EnvironmentKind::SingleTurn),
            HarnessParams::default(),
        );
        let tasks = vec![StreamTask::new("a", "t"), StreamTask::new("b", "t")];
        match harness.run_group("g", &tasks, 0, 0) {
            Err(HarnessError::Provider { position: 1, role: Role::Curator, task_id, .. }) => assert_eq!(task_id, "a"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
