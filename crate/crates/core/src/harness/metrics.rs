use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::PositionTrace;
use crate::curation::OpKind;
use crate::skill_store::SkillRepo;

/// Share of emitted operations by kind.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct OpProportions {
    pub insert: f64,
    pub update: f64,
    pub delete: f64,
    pub total: usize,
}

impl OpProportions {
    fn from_kinds<'a>(kinds: impl Iterator<Item = &'a OpKind>) -> Self {
        let (mut insert, mut update, mut delete) = (0usize, 0usize, 0usize);
        for kind in kinds {
            match kind {
                OpKind::Insert => insert += 1,
                OpKind::Update => update += 1,
                OpKind::Delete => delete += 1,
            }
        }
        let total = insert + update + delete;
        if total == 0 {
            return Self::default();
        }
        let t = total as f64;
        Self {
            insert: insert as f64 / t,
            update: update as f64 / t,
            delete: delete as f64 / t,
            total,
        }
    }
}

/// Op proportions over stream positions `start..=end` (1-based).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpBucket {
    pub start: usize,
    pub end: usize,
    pub proportions: OpProportions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamMetrics {
    pub examples: usize,
    /// Environment-reported success rate.
    pub success_rate: f64,
    pub success_by_subset: BTreeMap<String, f64>,
    /// Mean trajectory length over all examples, successful or not.
    pub mean_steps: f64,
    /// Fraction of examples with at least one retrieved skill.
    pub usage_rate: f64,
    /// Success rate among examples that used a skill; 0 when none did.
    pub successful_usage_rate: f64,
    pub successful_usage_defined: bool,
    /// Distinct retrieved skills still in the final repository, over its
    /// size; 0 for an empty repository.
    pub coverage: f64,
    pub mean_skills_per_example: f64,
    pub op_proportions: OpProportions,
    pub op_proportions_over_time: Vec<OpBucket>,
    /// How "used a skill" is detected.
    pub usage_proxy: String,
}

impl StreamMetrics {
    /// One CSV row per op bucket.
    pub fn op_buckets_csv(&self) -> String {
        let mut out = String::from("start,end,insert,update,delete,total\n");
        for b in &self.op_proportions_over_time {
            let p = b.proportions;
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                b.start, b.end, p.insert, p.update, p.delete, p.total
            ));
        }
        out
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn compute_metrics(positions: &[PositionTrace], final_repo: &SkillRepo, bucket: usize) -> StreamMetrics {
    let n = positions.len();
    let successes = positions.iter().filter(|p| p.trajectory.success).count();

    let mut by_subset: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for p in positions {
        if let Some(subset) = &p.subset {
            let entry = by_subset.entry(subset.clone()).or_default();
            entry.0 += usize::from(p.trajectory.success);
            entry.1 += 1;
        }
    }

    let users: Vec<&PositionTrace> = positions.iter().filter(|p| !p.retrieved.is_empty()).collect();
    let successful_users = users.iter().filter(|p| p.trajectory.success).count();

    let used: BTreeSet<&str> = positions
        .iter()
        .flat_map(|p| p.retrieved.iter().map(String::as_str))
        .filter(|name| final_repo.contains(name))
        .collect();

    let retrieved_total: usize = positions.iter().map(|p| p.retrieved.len()).sum();
    let steps_total: usize = positions.iter().map(|p| p.trajectory.step_count).sum();

    let kinds: Vec<Vec<OpKind>> = positions
        .iter()
        .map(|p| p.decision.ops.iter().map(|op| op.kind()).collect())
        .collect();
    let bucket = bucket.max(1);
    let op_proportions_over_time = kinds
        .chunks(bucket)
        .enumerate()
        .map(|(i, chunk)| OpBucket {
            start: i * bucket + 1,
            end: i * bucket + chunk.len(),
            proportions: OpProportions::from_kinds(chunk.iter().flatten()),
        })
        .collect();

    StreamMetrics {
        examples: n,
        success_rate: ratio(successes, n),
        success_by_subset: by_subset
            .into_iter()
            .map(|(k, (s, t))| (k, ratio(s, t)))
            .collect(),
        mean_steps: ratio(steps_total, n),
        usage_rate: ratio(users.len(), n),
        successful_usage_rate: ratio(successful_users, users.len()),
        successful_usage_defined: !users.is_empty(),
        coverage: ratio(used.len(), final_repo.len()),
        mean_skills_per_example: ratio(retrieved_total, n),
        op_proportions: OpProportions::from_kinds(kinds.iter().flatten()),
        op_proportions_over_time,
        usage_proxy: "retrieval".into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curation::{CurationDecision, CurationOp};
    use crate::harness::Trajectory;
    use crate::reward::TaskRecord;
    use crate::skill_store::Skill;

    fn position(i: usize, retrieved: &[&str], success: bool, ops: Vec<CurationOp>) -> PositionTrace {
        PositionTrace {
            group_id: "stream".into(),
            rollout: 0,
            position: i,
            task_id: format!("t{i}"),
            subset: None,
            retrieved: retrieved.iter().map(|s| s.to_string()).collect(),
            trajectory: Trajectory {
                steps: Vec::new(),
                success,
                step_count: i,
            },
            judged_success: success,
            decision: CurationDecision {
                ops,
                ..Default::default()
            },
            outcomes: Vec::new(),
            revision: 0,
            repo_size: 0,
            record: TaskRecord {
                success,
                validity: 1.0,
                judge_score: Some(0.5),
                repo_tokens: 0,
                context_tokens: 1,
            },
        }
    }

    fn ins(name: &str) -> CurationOp {
        CurationOp::Insert {
            name: name.into(),
            description: "d".into(),
            body: "b".into(),
        }
    }

    #[test]
    fn nothing_retrieved() {
        let positions = vec![position(1, &[], true, vec![]), position(2, &[], false, vec![])];
        let m = compute_metrics(&positions, &SkillRepo::new(), 10);
        assert_eq!(m.usage_rate, 0.0);
        assert_eq!(m.successful_usage_rate, 0.0);
        assert!(!m.successful_usage_defined);
        assert_eq!(m.coverage, 0.0);
        assert_eq!(m.success_rate, 0.5);
        assert_eq!(m.mean_steps, 1.5);
    }

    #[test]
    fn op_proportion_counting() {
        let ops = vec![
            ins("a"),
            ins("b"),
            CurationOp::Update { name: "a".into(), description: None, body: Some("x".into()) },
            CurationOp::Delete { name: "b".into() },
        ];
        let positions = vec![position(1, &[], true, ops)];
        let m = compute_metrics(&positions, &SkillRepo::new(), 10);
        assert_eq!((m.op_proportions.insert, m.op_proportions.update, m.op_proportions.delete), (0.5, 0.25, 0.25));
    }

    #[test]
    fn coverage_counts_surviving_skills_only() {
        let repo = SkillRepo::from_skills([Skill::new("kept", "d", "b").unwrap()]).unwrap();
        let positions = vec![position(1, &["kept", "gone"], true, vec![])];
        assert_eq!(compute_metrics(&positions, &repo, 10).coverage, 1.0);
    }

    #[test]
    fn buckets_split_positions() {
        let positions: Vec<_> = (1..=5).map(|i| position(i, &[], true, vec![ins("x")])).collect();
        let m = compute_metrics(&positions, &SkillRepo::new(), 2);
        let spans: Vec<_> = m.op_proportions_over_time.iter().map(|b| (b.start, b.end)).collect();
        assert_eq!(spans, vec![(1, 2), (3, 4), (5, 5)]);
        assert!(m.op_buckets_csv().starts_with("start,end"));
    }
}
