//! Related-task group construction.
//!
//! Every task carries five phrase lists (topics, skills, concepts,
//! strategies, pitfalls) and a scalar difficulty. Groups are grown one
//! successor at a time: candidates that share an exact concept, strategy or
//! pitfall phrase with the current tail are gated by six admissibility
//! conditions and ranked by a weighted soft-Jaccard score plus a difficulty
//! bonus; a uniformly sampled fallback pool catches pairs that agree only
//! semantically.

mod pipeline;
mod similarity;

pub use pipeline::{
    build_group, build_groups, dependency_gate, dependency_gate_in_mode, difficulty_bonus,
    group_by_label, overall_similarity, pair_score, GateOutcome, GroupPlan, GroupSize, GroupStep,
    Grouper, GroupingRun, InvertedIndex, LabelGroup, SourceTag, Successor, TaskGroup,
};
pub use similarity::{
    matched_count, matched_count_with, soft_jaccard, soft_jaccard_with, PhraseSimilarity,
    PhraseVectors,
};

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::gateway::GatewayError;

pub const MAX_PHRASES: usize = 5;
pub const MAX_PHRASE_WORDS: usize = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnnotationError {
    #[error("annotation is not a JSON object")]
    NotAnObject,
    #[error("annotation is missing `{0}`")]
    MissingDimension(&'static str),
    #[error("`{0}` must be a list of strings")]
    NotAList(&'static str),
    #[error("`{dimension}` has an empty phrase")]
    EmptyPhrase { dimension: &'static str },
    #[error("`{dimension}` phrase {phrase:?} has more than {MAX_PHRASE_WORDS} words")]
    PhraseTooLong {
        dimension: &'static str,
        phrase: String,
    },
    #[error("`{dimension}` has {count} phrases; at most {MAX_PHRASES} are allowed")]
    TooManyPhrases { dimension: &'static str, count: usize },
}

#[derive(Debug, Error)]
pub enum GroupingError {
    #[error("task `{id}`: {source}")]
    Annotation {
        id: String,
        #[source]
        source: AnnotationError,
    },
    #[error("task id `{0}` appears more than once")]
    DuplicateId(String),
    #[error("task `{0}` has no difficulty")]
    MissingDifficulty(String),
    #[error("seed task `{0}` is not in the corpus")]
    SeedNotInCorpus(String),
    #[error("group length must be at least 2, got {0}")]
    InvalidLength(usize),
    #[error("invalid grouping parameters: {0}")]
    InvalidParams(String),
    #[error("task `{0}` has no label")]
    UnlabeledTask(String),
    #[error("embedder failure: {0}")]
    EmbedderFailure(#[from] GatewayError),
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// The five annotation dimensions, in weight order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    Concepts,
    Skills,
    Strategies,
    Pitfalls,
    Topics,
}

impl Dimension {
    pub const ALL: [Dimension; 5] = [
        Dimension::Concepts,
        Dimension::Skills,
        Dimension::Strategies,
        Dimension::Pitfalls,
        Dimension::Topics,
    ];

    /// Dimensions routed through the inverted index.
    pub const DEPENDENCY: [Dimension; 3] =
        [Dimension::Concepts, Dimension::Strategies, Dimension::Pitfalls];

    pub fn key(&self) -> &'static str {
        match self {
            Dimension::Concepts => "concepts",
            Dimension::Skills => "skills",
            Dimension::Strategies => "strategies",
            Dimension::Pitfalls => "pitfalls",
            Dimension::Topics => "topics",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeSet {
    pub topics: Vec<String>,
    pub skills: Vec<String>,
    pub concepts: Vec<String>,
    pub strategies: Vec<String>,
    pub pitfalls: Vec<String>,
}

impl AttributeSet {
    pub fn get(&self, dimension: Dimension) -> &[String] {
        match dimension {
            Dimension::Concepts => &self.concepts,
            Dimension::Skills => &self.skills,
            Dimension::Strategies => &self.strategies,
            Dimension::Pitfalls => &self.pitfalls,
            Dimension::Topics => &self.topics,
        }
    }

    fn get_mut(&mut self, dimension: Dimension) -> &mut Vec<String> {
        match dimension {
            Dimension::Concepts => &mut self.concepts,
            Dimension::Skills => &mut self.skills,
            Dimension::Strategies => &mut self.strategies,
            Dimension::Pitfalls => &mut self.pitfalls,
            Dimension::Topics => &mut self.topics,
        }
    }

    pub fn phrases(&self) -> impl Iterator<Item = &str> {
        Dimension::ALL
            .into_iter()
            .flat_map(move |d| self.get(d).iter().map(String::as_str))
    }
}

/// Lowercases, collapses internal whitespace and strips punctuation from
/// both ends.
pub fn normalize_phrase(phrase: &str) -> String {
    let collapsed = phrase
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase();
    collapsed
        .trim_matches(|c: char| c.is_ascii_punctuation() || c.is_whitespace())
        .to_string()
}

/// Validates and normalizes a raw annotation with the five phrase lists.
/// Duplicate phrases within a list are dropped.
pub fn validate_annotation(raw: &Value) -> Result<AttributeSet, AnnotationError> {
    let obj = raw.as_object().ok_or(AnnotationError::NotAnObject)?;
    let mut attributes = AttributeSet::default();
    for dimension in Dimension::ALL {
        let key = dimension.key();
        let list = obj
            .get(key)
            .ok_or(AnnotationError::MissingDimension(key))?
            .as_array()
            .ok_or(AnnotationError::NotAList(key))?;
        let mut seen = HashSet::new();
        let target = attributes.get_mut(dimension);
        for item in list {
            let phrase = normalize_phrase(item.as_str().ok_or(AnnotationError::NotAList(key))?);
            if phrase.is_empty() {
                return Err(AnnotationError::EmptyPhrase { dimension: key });
            }
            if phrase.split_whitespace().count() > MAX_PHRASE_WORDS {
                return Err(AnnotationError::PhraseTooLong {
                    dimension: key,
                    phrase,
                });
            }
            if seen.insert(phrase.clone()) {
                target.push(phrase);
            }
        }
        if target.len() > MAX_PHRASES {
            return Err(AnnotationError::TooManyPhrases {
                dimension: key,
                count: target.len(),
            });
        }
    }
    Ok(attributes)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedTask {
    pub id: String,
    pub text: String,
    pub difficulty: f64,
    pub attributes: AttributeSet,
}

impl AnnotatedTask {
    /// Parses one corpus record: `{id, text, difficulty, topics, skills,
    /// concepts, strategies, pitfalls}`.
    pub fn from_record(record: &Value) -> Result<Self, GroupingError> {
        let id = record
            .get("id")
            .map(|v| match v {
                Value::String(s) => s.clone(),
                other => other.to_string(),
            })
            .ok_or_else(|| GroupingError::Annotation {
                id: "<unknown>".into(),
                source: AnnotationError::MissingDimension("id"),
            })?;
        let text = record
            .get("text")
            .and_then(Value::as_str)
            .unwrap_or_default()
            .to_string();
        let difficulty = record
            .get("difficulty")
            .and_then(Value::as_f64)
            .ok_or_else(|| GroupingError::MissingDifficulty(id.clone()))?;
        let attributes = validate_annotation(record).map_err(|source| GroupingError::Annotation {
            id: id.clone(),
            source,
        })?;
        Ok(Self {
            id,
            text,
            difficulty,
            attributes,
        })
    }

    pub fn to_record(&self) -> Value {
        let a = &self.attributes;
        serde_json::json!({
            "id": self.id,
            "text": self.text,
            "difficulty": self.difficulty,
            "topics": a.topics,
            "skills": a.skills,
            "concepts": a.concepts,
            "strategies": a.strategies,
            "pitfalls": a.pitfalls,
        })
    }
}

/// Annotated tasks with unique ids, in load order.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    tasks: Vec<AnnotatedTask>,
    by_id: HashMap<String, usize>,
}

impl Corpus {
    pub fn new(tasks: Vec<AnnotatedTask>) -> Result<Self, GroupingError> {
        let mut by_id = HashMap::with_capacity(tasks.len());
        for (idx, task) in tasks.iter().enumerate() {
            if by_id.insert(task.id.clone(), idx).is_some() {
                return Err(GroupingError::DuplicateId(task.id.clone()));
            }
        }
        Ok(Self { tasks, by_id })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, GroupingError> {
        let records = read_jsonl(path.as_ref())?;
        let tasks = records
            .iter()
            .map(|(_, v)| AnnotatedTask::from_record(v))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(tasks)
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn tasks(&self) -> &[AnnotatedTask] {
        &self.tasks
    }

    pub fn task(&self, index: usize) -> &AnnotatedTask {
        &self.tasks[index]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.by_id.get(id).copied()
    }

    pub fn get(&self, id: &str) -> Option<&AnnotatedTask> {
        self.index_of(id).map(|i| &self.tasks[i])
    }
}

/// Reads non-blank JSONL lines as `(line number, value)`.
pub(crate) fn read_jsonl(path: &Path) -> Result<Vec<(usize, Value)>, GroupingError> {
    let file = fs::File::open(path).map_err(|source| GroupingError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| GroupingError::Io {
            path: path.display().to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| GroupingError::Parse {
            path: path.display().to_string(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        out.push((idx + 1, value));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DimensionWeights {
    pub concepts: f64,
    pub skills: f64,
    pub strategies: f64,
    pub pitfalls: f64,
    pub topics: f64,
}

impl Default for DimensionWeights {
    fn default() -> Self {
        Self {
            concepts: 5.0,
            skills: 4.0,
            strategies: 3.0,
            pitfalls: 1.0,
            topics: 2.0,
        }
    }
}

impl DimensionWeights {
    pub fn get(&self, dimension: Dimension) -> f64 {
        match dimension {
            Dimension::Concepts => self.concepts,
            Dimension::Skills => self.skills,
            Dimension::Strategies => self.strategies,
            Dimension::Pitfalls => self.pitfalls,
            Dimension::Topics => self.topics,
        }
    }

    pub fn sum(&self) -> f64 {
        Dimension::ALL.iter().map(|d| self.get(*d)).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModeProbabilities {
    pub up: f64,
    pub same: f64,
    pub down: f64,
}

impl Default for ModeProbabilities {
    fn default() -> Self {
        Self {
            up: 0.80,
            same: 0.20,
            down: 0.00,
        }
    }
}

/// Direction the difficulty may move when extending a group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurriculumMode {
    /// Easy to hard: the gap must fall in `[gap_min, gap_max]`.
    Up,
    /// Same level: `|gap| <= delta_same`.
    Same,
    /// Hard to easy: the gap must be negative.
    Down,
}

impl ModeProbabilities {
    /// Maps a uniform draw in `[0, 1)` to a mode.
    pub fn pick(&self, u: f64) -> CurriculumMode {
        if u < self.up {
            CurriculumMode::Up
        } else if u < self.up + self.same {
            CurriculumMode::Same
        } else {
            CurriculumMode::Down
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GroupingParams {
    /// Name of the phrase encoder the embeddings should come from.
    pub encoder: String,
    pub tau: f64,
    pub kappa_c: usize,
    pub kappa_s: usize,
    pub theta_t: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub delta_min: f64,
    pub weights: DimensionWeights,
    pub lambda: f64,
    pub mode_probs: ModeProbabilities,
    pub gap_min: f64,
    pub gap_max: f64,
    pub delta_same: f64,
    pub k_inv: usize,
    pub fallback_pool: usize,
}

impl Default for GroupingParams {
    fn default() -> Self {
        Self {
            encoder: "all-MiniLM-L6-v2".into(),
            tau: 0.60,
            kappa_c: 1,
            kappa_s: 1,
            theta_t: 0.65,
            sigma_min: 0.30,
            sigma_max: 0.85,
            delta_min: 0.0,
            weights: DimensionWeights::default(),
            lambda: 1.0,
            mode_probs: ModeProbabilities::default(),
            gap_min: 0.5,
            gap_max: 3.0,
            delta_same: 0.3,
            k_inv: 2000,
            fallback_pool: 200,
        }
    }
}

impl GroupingParams {
    pub fn validate(&self) -> Result<(), GroupingError> {
        let fail = |msg: &str| Err(GroupingError::InvalidParams(msg.to_string()));
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return fail("tau must lie in (0, 1)");
        }
        if self.sigma_min >= self.sigma_max {
            return fail("sigma_min must be below sigma_max");
        }
        if self.gap_min >= self.gap_max {
            return fail("gap_min must be below gap_max");
        }
        let w = self.weights;
        if Dimension::ALL.iter().any(|d| w.get(*d) < 0.0) || w.sum() <= 0.0 {
            return fail("weights must be non-negative with a positive sum");
        }
        let p = self.mode_probs;
        if [p.up, p.same, p.down].iter().any(|x| *x < 0.0) || (p.up + p.same + p.down - 1.0).abs() > 1e-9 {
            return fail("mode probabilities must be non-negative and sum to 1");
        }
        if self.lambda < 0.0 || self.delta_same < 0.0 {
            return fail("lambda and delta_same must be non-negative");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn raw() -> Value {
        json!({
            "topics": ["Number Theory"],
            "skills": ["modular  reduction", "case analysis."],
            "concepts": ["Fermat's little theorem"],
            "strategies": ["work modulo small primes"],
            "pitfalls": ["forgetting the zero case"]
        })
    }

    #[test]
    fn valid_annotation_is_normalized() {
        let attrs = validate_annotation(&raw()).unwrap();
        assert_eq!(attrs.topics, ["number theory"]);
        assert_eq!(attrs.skills, ["modular reduction", "case analysis"]);
    }

    #[test]
    fn long_phrase_rejected() {
        let mut r = raw();
        r["skills"] = json!(["one two three four five six seven"]);
        assert!(matches!(validate_annotation(&r), Err(AnnotationError::PhraseTooLong { .. })));
    }

    #[test]
    fn missing_dimension_rejected() {
        let mut r = raw();
        r.as_object_mut().unwrap().remove("pitfalls");
        assert_eq!(validate_annotation(&r), Err(AnnotationError::MissingDimension("pitfalls")));
    }

    #[test]
    fn too_many_phrases_rejected() {
        let mut r = raw();
        r["topics"] = json!(["a", "b", "c", "d", "e", "f"]);
        assert!(matches!(validate_annotation(&r), Err(AnnotationError::TooManyPhrases { count: 6, .. })));
        r["topics"] = json!(["a", "a", "b", "c", "d", "e"]);
        assert!(validate_annotation(&r).is_ok());
    }

    #[test]
    fn empty_phrase_rejected() {
        let mut r = raw();
        r["topics"] = json!(["  ...  "]);
        assert!(matches!(validate_annotation(&r), Err(AnnotationError::EmptyPhrase { .. })));
    }

    #[test]
    fn mode_pick_boundaries() {
        let p = ModeProbabilities::default();
        assert_eq!(p.pick(0.0), CurriculumMode::Up);
        assert_eq!(p.pick(0.79), CurriculumMode::Up);
        assert_eq!(p.pick(0.80), CurriculumMode::Same);
        assert_eq!(p.pick(0.999), CurriculumMode::Same);
    }

    #[test]
    fn params_validation() {
        assert!(GroupingParams::default().validate().is_ok());
        let bad = GroupingParams {
            sigma_min: 0.9,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = GroupingParams {
            mode_probs: ModeProbabilities { up: 0.5, same: 0.2, down: 0.0 },
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn record_without_difficulty_names_task() {
        let mut r = raw();
        r["id"] = json!("t7");
        match AnnotatedTask::from_record(&r) {
            Err(GroupingError::MissingDifficulty(id)) => assert_eq!(id, "t7"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_ids_rejected() {
        let mut r = raw();
        r["id"] = json!("a");
        r["difficulty"] = json!(1.0);
        let t = AnnotatedTask::from_record(&r).unwrap();
        assert!(matches!(Corpus::new(vec![t.clone(), t]), Err(GroupingError::DuplicateId(_))));
    }
}
