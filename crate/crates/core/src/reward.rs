//! The composite curation reward and its four components.
//!
//! For a group of `|G|` positions:
//!
//! * `r_task` is the mean success over positions 2..=|G| (position 1 always
//!   runs against an empty repository),
//! * `r_fc` is the mean call validity,
//! * `r_cnt` is the mean judge score,
//! * `r_comp` is the mean of `1 - |S_i| / |χ_i|`, clamped to `[0, 1]` by
//!   default,
//!
//! and `total = r_task + λ_f·r_fc + λ_u·r_cnt + λ_c·r_comp`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RewardError {
    #[error("group has {len} positions; at least {min} are required")]
    GroupTooSmall { len: usize, min: usize },
    #[error("position {position} has an empty curator context")]
    ZeroContext { position: usize },
    #[error("position {position} has no judge score")]
    MissingJudgeScore { position: usize },
}

/// Everything the reward needs from one position of a group rollout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub success: bool,
    pub validity: f64,
    pub judge_score: Option<f64>,
    pub repo_tokens: usize,
    pub context_tokens: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardWeights {
    pub lambda_f: f64,
    pub lambda_u: f64,
    pub lambda_c: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            lambda_f: 1.0,
            lambda_u: 0.1,
            lambda_c: 0.05,
        }
    }
}

impl RewardWeights {
    pub fn is_valid(&self) -> bool {
        [self.lambda_f, self.lambda_u, self.lambda_c]
            .iter()
            .all(|w| w.is_finite() && *w >= 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub r_task: f64,
    pub r_fc: f64,
    pub r_cnt: f64,
    pub r_comp: f64,
    pub weights: RewardWeights,
    pub total: f64,
}

impl RewardBreakdown {
    pub fn from_components(
        r_task: f64,
        r_fc: f64,
        r_cnt: f64,
        r_comp: f64,
        weights: RewardWeights,
    ) -> Self {
        let total = r_task
            + weights.lambda_f * r_fc
            + weights.lambda_u * r_cnt
            + weights.lambda_c * r_comp;
        Self {
            r_task,
            r_fc,
            r_cnt,
            r_comp,
            weights,
            total,
        }
    }

    /// Same components under different weights.
    pub fn reweighted(&self, weights: RewardWeights) -> Self {
        Self::from_components(self.r_task, self.r_fc, self.r_cnt, self.r_comp, weights)
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

pub fn task_outcome_reward(records: &[TaskRecord]) -> Result<f64, RewardError> {
    if records.len() < 2 {
        return Err(RewardError::GroupTooSmall {
            len: records.len(),
            min: 2,
        });
    }
    let successes = records[1..].iter().filter(|r| r.success).count();
    Ok(successes as f64 / (records.len() - 1) as f64)
}

pub fn function_call_reward(records: &[TaskRecord]) -> Result<f64, RewardError> {
    if records.is_empty() {
        return Err(RewardError::GroupTooSmall { len: 0, min: 1 });
    }
    Ok(mean(records.iter().map(|r| r.validity.clamp(0.0, 1.0))))
}

/// Mean of `1 - repo_tokens / context_tokens`; each term is clamped to
/// `[0, 1]` when `clamp` is set.
pub fn compression_reward(records: &[TaskRecord], clamp: bool) -> Result<f64, RewardError> {
    if records.is_empty() {
        return Err(RewardError::GroupTooSmall { len: 0, min: 1 });
    }
    let mut terms = Vec::with_capacity(records.len());
    for (position, record) in records.iter().enumerate() {
        if record.context_tokens == 0 {
            return Err(RewardError::ZeroContext { position });
        }
        let term = 1.0 - record.repo_tokens as f64 / record.context_tokens as f64;
        terms.push(if clamp { term.clamp(0.0, 1.0) } else { term });
    }
    Ok(mean(terms.into_iter()))
}

pub fn content_quality_reward(records: &[TaskRecord]) -> Result<f64, RewardError> {
    if records.is_empty() {
        return Err(RewardError::GroupTooSmall { len: 0, min: 1 });
    }
    let mut scores = Vec::with_capacity(records.len());
    for (position, record) in records.iter().enumerate() {
        let score = record
            .judge_score
            .ok_or(RewardError::MissingJudgeScore { position })?;
        scores.push(score.clamp(0.0, 1.0));
    }
    Ok(mean(scores.into_iter()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardSettings {
    #[serde(flatten)]
    pub weights: RewardWeights,
    pub clamp_compression: bool,
}

impl Default for RewardSettings {
    fn default() -> Self {
        Self {
            weights: RewardWeights::default(),
            clamp_compression: true,
        }
    }
}

/// Composite reward with compression clamping on.
pub fn composite_reward(
    records: &[TaskRecord],
    weights: RewardWeights,
) -> Result<RewardBreakdown, RewardError> {
    composite_reward_with(
        records,
        &RewardSettings {
            weights,
            clamp_compression: true,
        },
    )
}

pub fn composite_reward_with(
    records: &[TaskRecord],
    settings: &RewardSettings,
) -> Result<RewardBreakdown, RewardError> {
    let r_task = task_outcome_reward(records)?;
    let r_fc = function_call_reward(records)?;
    let r_cnt = content_quality_reward(records)?;
    let r_comp = compression_reward(records, settings.clamp_compression)?;
    Ok(RewardBreakdown::from_components(
        r_task,
        r_fc,
        r_cnt,
        r_comp,
        settings.weights,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(success: bool) -> TaskRecord {
        TaskRecord {
            success,
            validity: 1.0,
            judge_score: Some(0.5),
            repo_tokens: 0,
            context_tokens: 100,
        }
    }

    fn with_validity(v: f64) -> TaskRecord {
        TaskRecord {
            validity: v,
            ..record(true)
        }
    }

    fn with_tokens(repo: usize, ctx: usize) -> TaskRecord {
        TaskRecord {
            repo_tokens: repo,
            context_tokens: ctx,
            ..record(true)
        }
    }

    #[test]
    fn task_outcome_skips_first_position() {
        let records: Vec<_> = [true, true, false, true].into_iter().map(record).collect();
        assert_eq!(task_outcome_reward(&records).unwrap(), 2.0 / 3.0);
        let failures: Vec<_> = [false; 4].into_iter().map(record).collect();
        assert_eq!(task_outcome_reward(&failures).unwrap(), 0.0);
        assert_eq!(
            task_outcome_reward(&[record(true)]),
            Err(RewardError::GroupTooSmall { len: 1, min: 2 })
        );
    }

    #[test]
    fn function_call_mean() {
        let r = |vs: &[f64]| function_call_reward(&vs.iter().copied().map(with_validity).collect::<Vec<_>>()).unwrap();
        assert_eq!(r(&[1.0, 0.5]), 0.75);
        assert_eq!(r(&[1.0, 1.0, 1.0]), 1.0);
        assert!((r(&[0.6, 0.6, 0.0, 1.0]) - 0.55).abs() < 1e-15);
    }

    #[test]
    fn compression_terms() {
        let c = |repo, ctx| compression_reward(&[with_tokens(repo, ctx)], true).unwrap();
        assert_eq!(c(0, 1000), 1.0);
        assert_eq!(c(1000, 1000), 0.0);
        assert_eq!(c(2000, 1000), 0.0);
        assert_eq!(compression_reward(&[with_tokens(2000, 1000)], false).unwrap(), -1.0);
        assert_eq!(
            compression_reward(&[with_tokens(1, 0)], true),
            Err(RewardError::ZeroContext { position: 0 })
        );
    }

    #[test]
    fn content_quality_mean_and_missing_score() {
        let scored = |s: Option<f64>| TaskRecord {
            judge_score: s,
            ..record(true)
        };
        assert!((content_quality_reward(&[scored(Some(0.8)), scored(Some(0.6))]).unwrap() - 0.7).abs() < 1e-15);
        assert_eq!(content_quality_reward(&[scored(Some(0.0)); 3]).unwrap(), 0.0);
        assert_eq!(
            content_quality_reward(&[scored(Some(0.1)), scored(None)]),
            Err(RewardError::MissingJudgeScore { position: 1 })
        );
    }

    #[test]
    fn weighted_total() {
        let b = RewardBreakdown::from_components(2.0 / 3.0, 1.0, 0.7, 0.9, RewardWeights::default());
        assert_eq!(b.total, 2.0 / 3.0 + 1.0 * 1.0 + 0.1 * 0.7 + 0.05 * 0.9);
        assert!((b.total - 1.781_666_666_666_666_7).abs() < 1e-12);

        let zero = RewardBreakdown::from_components(0.0, 0.0, 0.0, 0.0, RewardWeights::default());
        assert_eq!(zero.total, 0.0);

        let no_weights = RewardWeights {
            lambda_f: 0.0,
            lambda_u: 0.0,
            lambda_c: 0.0,
        };
        let b = RewardBreakdown::from_components(0.25, 1.0, 1.0, 1.0, no_weights);
        assert_eq!(b.total, 0.25);
    }

    #[test]
    fn composite_propagates_errors() {
        assert!(matches!(
            composite_reward(&[record(true)], RewardWeights::default()),
            Err(RewardError::GroupTooSmall { .. })
        ));
        let mut records = vec![record(true), record(false)];
        records[1].judge_score = None;
        assert_eq!(
            composite_reward(&records, RewardWeights::default()),
            Err(RewardError::MissingJudgeScore { position: 1 })
        );
    }
}
