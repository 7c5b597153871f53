//! Skill-repository curation runtime.
//!
//! * [`skill_store`]: `SKILL.md` documents and the versioned repository.
//! * [`curation`]: curator tool-call parsing and application.
//! * [`retrieval`]: BM25 ranking over skills.
//! * [`reward`]: the four-term curation reward.
//! * [`policy`]: group-relative advantages and the clipped surrogate.
//! * [`grouping`]: related-task group construction.
//! * [`gateway`]: model clients, fixtures and phrase embedders.
//! * [`harness`]: group rollouts, streaming evaluation and metrics.
//! * [`config`]: the run configuration with every default materialized.

pub mod config;
pub mod curation;
pub mod gateway;
pub mod grouping;
pub mod harness;
pub mod policy;
pub mod prompts;
pub mod retrieval;
pub mod reward;
pub mod skill_store;

pub use curation::{apply_ops, parse_decision, CurationDecision, CurationOp};
pub use reward::{composite_reward, RewardBreakdown, RewardWeights, TaskRecord};
pub use skill_store::{parse_skill, serialize_skill, Skill, SkillRepo};
