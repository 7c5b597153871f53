//! Python bindings for the skill curation runtime.

use pyo3::exceptions::{PyKeyError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use skillrepo::config::RunConfig;
use skillrepo::curation;
use skillrepo::gateway::StubEmbedder;
use skillrepo::grouping::{self, Corpus, GroupPlan, GroupSize, Grouper, GroupingParams};
use skillrepo::policy;
use skillrepo::retrieval::SkillIndex;
use skillrepo::reward::{self, RewardSettings, RewardWeights, TaskRecord};
use skillrepo::skill_store;

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(name = "Skill", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PySkill {
    inner: skill_store::Skill,
}

#[pymethods]
impl PySkill {
    #[new]
    fn new(name: &str, description: &str, body: &str) -> PyResult<Self> {
        let inner = skill_store::Skill::new(name, description, body).map_err(value_error)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        let inner = skill_store::parse_skill(text).map_err(value_error)?;
        Ok(Self { inner })
    }

    #[getter]
    fn name(&self) -> &str {
        self.inner.name()
    }

    #[getter]
    fn description(&self) -> &str {
        self.inner.description()
    }

    #[getter]
    fn body(&self) -> &str {
        self.inner.body()
    }

    fn to_markdown(&self) -> String {
        skill_store::serialize_skill(&self.inner)
    }

    fn __eq__(&self, other: PyRef<'_, PySkill>) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!("Skill(name={:?})", self.inner.name())
    }
}

#[pyclass(name = "SkillRepo", frozen, skip_from_py_object)]
#[derive(Clone, Default)]
struct PySkillRepo {
    inner: skill_store::SkillRepo,
}

#[pymethods]
impl PySkillRepo {
    #[new]
    fn new() -> Self {
        Self::default()
    }

    #[staticmethod]
    fn load(dir: &str) -> PyResult<Self> {
        let inner = skill_store::load_repo(dir).map_err(value_error)?;
        Ok(Self { inner })
    }

    fn save(&self, dir: &str) -> PyResult<()> {
        skill_store::save_repo(&self.inner, dir).map_err(value_error)
    }

    #[getter]
    fn revision(&self) -> u64 {
        self.inner.revision()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __contains__(&self, name: &str) -> bool {
        self.inner.contains(name)
    }

    fn names(&self) -> Vec<String> {
        self.inner.names().map(str::to_string).collect()
    }

    fn get(&self, name: &str) -> PyResult<PySkill> {
        self.inner
            .get(name)
            .map(|s| PySkill { inner: s.clone() })
            .ok_or_else(|| PyKeyError::new_err(name.to_string()))
    }

    /// Parses a raw curator response and applies it. Returns the new repo,
    /// one outcome string per call ("applied" or the rejection reason), and
    /// the validity fraction.
    fn apply(&self, curator_response: &str) -> (PySkillRepo, Vec<String>, f64) {
        let decision = curation::parse_decision(curator_response);
        let report = curation::apply_ops(&self.inner, &decision);
        let validity = curation::validity_fraction(&report);
        let outcomes = report
            .outcomes
            .iter()
            .map(|o| match o {
                curation::OpOutcome::Applied => "applied".to_string(),
                curation::OpOutcome::Rejected { reason } => format!("rejected: {reason:?}"),
            })
            .collect();
        (PySkillRepo { inner: report.repo }, outcomes, validity)
    }

    /// Top-`k` skills by BM25 score as `(name, score)` pairs.
    #[pyo3(signature = (query, k = 5))]
    fn retrieve(&self, query: &str, k: usize) -> Vec<(String, f64)> {
        SkillIndex::build(&self.inner)
            .retrieve(query, k)
            .into_iter()
            .map(|s| (s.name, s.score))
            .collect()
    }

    fn token_length(&self) -> usize {
        skill_store::repo_token_length(&self.inner, &skill_store::WhitespaceTokens)
    }
}

/// The parsed decision as a JSON string.
#[pyfunction]
fn parse_decision(curator_response: &str) -> String {
    serde_json::to_string(&curation::parse_decision(curator_response)).expect("decision serializes")
}

/// Four-term reward for one group. Every list has one entry per position.
#[pyfunction]
#[pyo3(signature = (success, validity, judge_scores, repo_tokens, context_tokens, lambda_f = 1.0, lambda_u = 0.1, lambda_c = 0.05, clamp_compression = true))]
#[allow(clippy::too_many_arguments)]
fn composite_reward<'py>(
    py: Python<'py>,
    success: Vec<bool>,
    validity: Vec<f64>,
    judge_scores: Vec<f64>,
    repo_tokens: Vec<usize>,
    context_tokens: Vec<usize>,
    lambda_f: f64,
    lambda_u: f64,
    lambda_c: f64,
    clamp_compression: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let n = success.len();
    if [validity.len(), judge_scores.len(), repo_tokens.len(), context_tokens.len()]
        .iter()
        .any(|len| *len != n)
    {
        return Err(PyValueError::new_err("all lists must have the same length"));
    }
    let records: Vec<TaskRecord> = (0..n)
        .map(|i| TaskRecord {
            success: success[i],
            validity: validity[i],
            judge_score: Some(judge_scores[i]),
            repo_tokens: repo_tokens[i],
            context_tokens: context_tokens[i],
        })
        .collect();
    let settings = RewardSettings {
        weights: RewardWeights {
            lambda_f,
            lambda_u,
            lambda_c,
        },
        clamp_compression,
    };
    let b = reward::composite_reward_with(&records, &settings).map_err(value_error)?;
    let out = PyDict::new(py);
    out.set_item("r_task", b.r_task)?;
    out.set_item("r_fc", b.r_fc)?;
    out.set_item("r_cnt", b.r_cnt)?;
    out.set_item("r_comp", b.r_comp)?;
    out.set_item("total", b.total)?;
    Ok(out)
}

#[pyfunction]
fn group_advantages(rewards: Vec<f64>) -> PyResult<Vec<f64>> {
    policy::group_advantages(&rewards).map_err(value_error)
}

#[pyfunction]
#[pyo3(signature = (ratios, advantages, epsilon = policy::DEFAULT_CLIP_EPSILON))]
fn clipped_objective(ratios: Vec<f64>, advantages: Vec<f64>, epsilon: f64) -> PyResult<f64> {
    policy::clipped_objective(&ratios, &advantages, epsilon).map_err(value_error)
}

/// Soft-Jaccard under the deterministic stub embedder.
#[pyfunction]
#[pyo3(signature = (a, b, tau = 0.6))]
fn soft_jaccard(a: Vec<String>, b: Vec<String>, tau: f64) -> PyResult<f64> {
    grouping::soft_jaccard(&a, &b, tau, &StubEmbedder::default()).map_err(value_error)
}

/// Groups an annotated JSONL corpus with default parameters and the stub
/// embedder; returns task-id lists.
#[pyfunction]
#[pyo3(signature = (corpus_path, size = 10, seed = 0))]
fn build_groups(corpus_path: &str, size: usize, seed: u64) -> PyResult<Vec<Vec<String>>> {
    let corpus = Corpus::load(corpus_path).map_err(value_error)?;
    let grouper = Grouper::with_embedder(&corpus, GroupingParams::default(), &StubEmbedder::default())
        .map_err(value_error)?;
    let plan = GroupPlan {
        size: GroupSize::Fixed(size),
        seed,
        max_groups: None,
    };
    let run = grouper.build_groups(&plan).map_err(value_error)?;
    Ok(run.groups.into_iter().map(|g| g.task_ids).collect())
}

/// The default run configuration as TOML.
#[pyfunction]
fn default_config() -> String {
    RunConfig::default().to_toml()
}

#[pymodule]
#[pyo3(name = "skillrepo")]
fn py_skillrepo(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySkill>()?;
    m.add_class::<PySkillRepo>()?;
    m.add_function(wrap_pyfunction!(parse_decision, m)?)?;
    m.add_function(wrap_pyfunction!(composite_reward, m)?)?;
    m.add_function(wrap_pyfunction!(group_advantages, m)?)?;
    m.add_function(wrap_pyfunction!(clipped_objective, m)?)?;
    m.add_function(wrap_pyfunction!(soft_jaccard, m)?)?;
    m.add_function(wrap_pyfunction!(build_groups, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    Ok(())
}
