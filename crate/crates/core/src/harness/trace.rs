//! JSONL traces and offline reward replay.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{PositionTrace, RolloutGroup};
use crate::reward::{composite_reward_with, RewardBreakdown, RewardError, RewardSettings, RewardWeights, TaskRecord};

/// Closes one rollout in a trace: its reward and advantage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardLine {
    pub group_id: String,
    pub rollout: usize,
    pub seed: u64,
    pub positions: usize,
    pub clamp_compression: bool,
    pub reward: RewardBreakdown,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub advantage: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceLine {
    Position(PositionTrace),
    Reward(RewardLine),
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: {message}")]
    Incomplete { line: usize, message: String },
    #[error("group `{group_id}` rollout {rollout}: {source}")]
    Reward {
        group_id: String,
        rollout: usize,
        #[source]
        source: RewardError,
    },
}

/// Position lines of every rollout, each followed by its reward line.
pub fn rollout_trace_lines(group: &RolloutGroup, clamp_compression: bool) -> Vec<TraceLine> {
    let mut lines = Vec::new();
    for (rollout, advantage) in group.rollouts.iter().zip(&group.advantages) {
        lines.extend(rollout.positions.iter().cloned().map(TraceLine::Position));
        lines.push(TraceLine::Reward(RewardLine {
            group_id: rollout.group_id.clone(),
            rollout: rollout.rollout,
            seed: rollout.seed,
            positions: rollout.positions.len(),
            clamp_compression,
            reward: rollout.reward,
            advantage: Some(*advantage),
        }));
    }
    lines
}

pub fn stream_trace_lines(positions: &[PositionTrace]) -> Vec<TraceLine> {
    positions.iter().cloned().map(TraceLine::Position).collect()
}

pub fn to_jsonl(lines: &[TraceLine]) -> String {
    let mut out = String::new();
    for line in lines {
        out.push_str(&serde_json::to_string(line).expect("trace lines serialize"));
        out.push('\n');
    }
    out
}

/// Appends `lines` to `path`, creating it if needed.
pub fn write_jsonl(path: impl AsRef<Path>, lines: &[TraceLine]) -> Result<(), TraceError> {
    let path = path.as_ref();
    let io = |source| TraceError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut file = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(io)?;
    file.write_all(to_jsonl(lines).as_bytes()).map_err(io)
}

pub fn read_trace(path: impl AsRef<Path>) -> Result<Vec<TraceLine>, TraceError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| TraceError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_trace(&text)
}

pub fn parse_trace(text: &str) -> Result<Vec<TraceLine>, TraceError> {
    let mut lines = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str(line).map_err(|e| TraceError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        lines.push(parsed);
    }
    Ok(lines)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayRow {
    pub group_id: String,
    pub rollout: usize,
    pub stored: RewardBreakdown,
    pub replayed: RewardBreakdown,
    /// Replayed total equals the stored total bit for bit.
    pub matches: bool,
}

/// Recomputes every rollout's reward from its position records, with the
/// stored weights or `weights` when given.
pub fn replay_rewards(lines: &[TraceLine], weights: Option<RewardWeights>) -> Result<Vec<ReplayRow>, TraceError> {
    let mut pending: BTreeMap<(String, usize), (usize, Vec<TaskRecord>)> = BTreeMap::new();
    let mut rows = Vec::new();
    for (i, line) in lines.iter().enumerate() {
        match line {
            TraceLine::Position(p) => {
                let entry = pending
                    .entry((p.group_id.clone(), p.rollout))
                    .or_insert_with(|| (i + 1, Vec::new()));
                entry.1.push(p.record);
            }
            TraceLine::Reward(r) => {
                let key = (r.group_id.clone(), r.rollout);
                let (_, records) = pending.remove(&key).unwrap_or_default();
                if records.len() != r.positions {
                    return Err(TraceError::Incomplete {
                        line: i + 1,
                        message: format!(
                            "reward for group `{}` rollout {} covers {} positions but {} were recorded",
                            r.group_id,
                            r.rollout,
                            r.positions,
                            records.len()
                        ),
                    });
                }
                let settings = RewardSettings {
                    weights: weights.unwrap_or(r.reward.weights),
                    clamp_compression: r.clamp_compression,
                };
                let replayed = composite_reward_with(&records, &settings).map_err(|source| TraceError::Reward {
                    group_id: r.group_id.clone(),
                    rollout: r.rollout,
                    source,
                })?;
                rows.push(ReplayRow {
                    group_id: r.group_id.clone(),
                    rollout: r.rollout,
                    stored: r.reward,
                    matches: replayed.total.to_bits() == r.reward.total.to_bits(),
                    replayed,
                });
            }
        }
    }
    if let Some(((group_id, rollout), (line, _))) = pending.into_iter().next() {
        return Err(TraceError::Incomplete {
            line,
            message: format!("group `{group_id}` rollout {rollout} has no reward record (truncated trace?)"),
        });
    }
    Ok(rows)
}
