//! Group-relative advantages and the clipped surrogate objective.
//!
//! Rewards are per rollout; the advantage of rollout `n` is its reward minus
//! the group mean and applies uniformly to every token the rollout emitted.
//! No KL term is used.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_CLIP_EPSILON: f64 = 0.2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("group has {0} rollouts; at least 2 are required")]
    GroupTooSmall(usize),
    #[error("{ratios} ratios but {advantages} advantages")]
    LengthMismatch { ratios: usize, advantages: usize },
    #[error("importance ratio at index {index} is {value}; ratios must be positive")]
    NonPositiveRatio { index: usize, value: f64 },
    #[error("clip epsilon {0} is outside (0, 1)")]
    InvalidEpsilon(f64),
}

/// `A_n = r_n - mean(r)`.
pub fn group_advantages(rewards: &[f64]) -> Result<Vec<f64>, PolicyError> {
    if rewards.len() < 2 {
        return Err(PolicyError::GroupTooSmall(rewards.len()));
    }
    let mean = rewards.iter().sum::<f64>() / rewards.len() as f64;
    Ok(rewards.iter().map(|r| r - mean).collect())
}

fn check_epsilon(epsilon: f64) -> Result<(), PolicyError> {
    if epsilon > 0.0 && epsilon < 1.0 {
        Ok(())
    } else {
        Err(PolicyError::InvalidEpsilon(epsilon))
    }
}

fn clipped_term(ratio: f64, advantage: f64, epsilon: f64) -> f64 {
    let unclipped = ratio * advantage;
    let clipped = ratio.clamp(1.0 - epsilon, 1.0 + epsilon) * advantage;
    unclipped.min(clipped)
}

/// Mean over rollouts of `min(ρ·A, clip(ρ, 1-ε, 1+ε)·A)`.
pub fn clipped_objective(
    ratios: &[f64],
    advantages: &[f64],
    epsilon: f64,
) -> Result<f64, PolicyError> {
    check_epsilon(epsilon)?;
    if ratios.len() != advantages.len() {
        return Err(PolicyError::LengthMismatch {
            ratios: ratios.len(),
            advantages: advantages.len(),
        });
    }
    if let Some((index, &value)) = ratios.iter().enumerate().find(|(_, r)| r.is_nan() || **r <= 0.0) {
        return Err(PolicyError::NonPositiveRatio { index, value });
    }
    if ratios.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = ratios
        .iter()
        .zip(advantages)
        .map(|(&r, &a)| clipped_term(r, a, epsilon))
        .sum();
    Ok(sum / ratios.len() as f64)
}

/// Objective when each rollout has one ratio per curation position: the
/// clipped terms are summed over positions within a rollout, then averaged
/// over rollouts.
pub fn sequence_clipped_objective(
    position_ratios: &[Vec<f64>],
    advantages: &[f64],
    epsilon: f64,
) -> Result<f64, PolicyError> {
    check_epsilon(epsilon)?;
    if position_ratios.len() != advantages.len() {
        return Err(PolicyError::LengthMismatch {
            ratios: position_ratios.len(),
            advantages: advantages.len(),
        });
    }
    if position_ratios.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    let mut flat_index = 0;
    for (ratios, &advantage) in position_ratios.iter().zip(advantages) {
        for &ratio in ratios {
            if ratio.is_nan() || ratio <= 0.0 {
                return Err(PolicyError::NonPositiveRatio {
                    index: flat_index,
                    value: ratio,
                });
            }
            total += clipped_term(ratio, advantage, epsilon);
            flat_index += 1;
        }
    }
    Ok(total / position_ratios.len() as f64)
}

/// One advantage per rollout, as handed to an external trainer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvantageRecord {
    pub group_id: String,
    pub rollout: usize,
    pub reward: f64,
    pub advantage: f64,
}

pub fn advantage_records(
    group_id: &str,
    rewards: &[f64],
) -> Result<Vec<AdvantageRecord>, PolicyError> {
    let advantages = group_advantages(rewards)?;
    Ok(rewards
        .iter()
        .zip(advantages)
        .enumerate()
        .map(|(rollout, (&reward, advantage))| AdvantageRecord {
            group_id: group_id.to_string(),
            rollout,
            reward,
            advantage,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn advantages_examples() {
        assert_eq!(group_advantages(&[1.0, 0.0, 1.0, 0.0]).unwrap(), [0.5, -0.5, 0.5, -0.5]);
        assert_eq!(group_advantages(&[0.3; 5]).unwrap(), [0.0; 5]);
        assert_eq!(group_advantages(&[2.0, 1.0, 0.5, 0.5]).unwrap(), [1.0, 0.0, -0.5, -0.5]);
        assert_eq!(group_advantages(&[1.0]), Err(PolicyError::GroupTooSmall(1)));
    }

    #[test]
    fn clip_inactive_at_unit_ratio() {
        let adv = [0.5, -0.25, 1.0];
        let obj = clipped_objective(&[1.0; 3], &adv, 0.2).unwrap();
        assert_eq!(obj, adv.iter().sum::<f64>() / 3.0);
    }

    #[test]
    fn clip_branches() {
        assert_eq!(clipped_objective(&[2.0], &[1.0], 0.2).unwrap(), 1.2);
        // unclipped: 0.5 * -1 = -0.5; clipped: 0.8 * -1 = -0.8; min = -0.8
        assert_eq!(clipped_objective(&[0.5], &[-1.0], 0.2).unwrap(), -0.8);
    }

    #[test]
    fn objective_errors() {
        assert_eq!(
            clipped_objective(&[1.0], &[1.0, 2.0], 0.2),
            Err(PolicyError::LengthMismatch { ratios: 1, advantages: 2 })
        );
        assert_eq!(
            clipped_objective(&[1.0, 0.0], &[1.0, 2.0], 0.2),
            Err(PolicyError::NonPositiveRatio { index: 1, value: 0.0 })
        );
        assert_eq!(clipped_objective(&[1.0], &[1.0], 1.5), Err(PolicyError::InvalidEpsilon(1.5)));
    }

    #[test]
    fn sequence_objective_sums_positions() {
        let obj = sequence_clipped_objective(&[vec![1.0, 2.0], vec![1.0]], &[1.0, -1.0], 0.2).unwrap();
        assert_eq!(obj, ((1.0 + 1.2) + -1.0) / 2.0);
    }

    #[test]
    fn advantage_records_carry_rollout_ids() {
        let recs = advantage_records("g0", &[1.0, 0.0]).unwrap();
        assert_eq!(recs[1].rollout, 1);
        assert_eq!(recs[1].advantage, -0.5);
    }
}
