//! Run configuration: one TOML document with a section per module. Every
//! omitted key takes its default, so `RunConfig::default()` is the fully
//! materialized baseline.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{
    ChatProvider, Embedder, GatewayError, HttpEmbedder, HttpProvider, HttpProviderConfig, ReplayProvider, Role,
    StubEmbedder, DEFAULT_STUB_DIM,
};
use crate::grouping::{GroupPlan, GroupingParams};
use crate::harness::{Clients, EnvironmentKind, HarnessParams, SuccessSource};
use crate::policy::DEFAULT_CLIP_EPSILON;
use crate::prompts::PromptSet;
use crate::retrieval::Bm25Params;
use crate::reward::RewardSettings;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error("{what} `{path}` does not exist")]
    MissingPath { what: String, path: String },
    #[error("no provider configured for role `{0}`")]
    Unconfigured(Role),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PathsConfig {
    pub corpus: Option<PathBuf>,
    pub tasks: Option<PathBuf>,
    pub groups: Option<PathBuf>,
    pub repo_dir: Option<PathBuf>,
    pub trace_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProviderConfig {
    #[default]
    None,
    Http(HttpProviderConfig),
    Replay { fixtures: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbedderConfig {
    /// Base URL of the embedding service; the deterministic stub is used
    /// when unset.
    pub url: Option<String>,
    pub timeout_secs: u64,
    pub stub_dim: usize,
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        Self {
            url: None,
            timeout_secs: 30,
            stub_dim: DEFAULT_STUB_DIM,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GatewayConfig {
    pub prompts_dir: Option<PathBuf>,
    pub executor: ProviderConfig,
    pub curator: ProviderConfig,
    pub judge: ProviderConfig,
    pub annotator: ProviderConfig,
    pub embedder: EmbedderConfig,
}

impl GatewayConfig {
    pub fn provider(&self, role: Role) -> &ProviderConfig {
        match role {
            Role::Executor => &self.executor,
            Role::Curator => &self.curator,
            Role::Judge => &self.judge,
            Role::Annotator => &self.annotator,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetrievalConfig {
    pub top_k: usize,
    pub k1: f64,
    pub b: f64,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        let bm25 = Bm25Params::default();
        Self {
            top_k: 5,
            k1: bm25.k1,
            b: bm25.b,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyConfig {
    pub clip_epsilon: f64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            clip_epsilon: DEFAULT_CLIP_EPSILON,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StreamHarnessConfig {
    pub environment: EnvironmentKind,
    pub benchmark: String,
    pub max_turns: usize,
    pub history_length: usize,
    /// Rollouts per group.
    pub group_size: usize,
    pub jobs: usize,
    pub success_source: SuccessSource,
    pub empty_decision_score: f64,
    pub metrics_bucket: usize,
}

impl Default for StreamHarnessConfig {
    fn default() -> Self {
        let h = HarnessParams::default();
        Self {
            environment: EnvironmentKind::default(),
            benchmark: h.benchmark,
            max_turns: h.max_turns,
            history_length: h.history_length,
            group_size: h.rollouts,
            jobs: h.jobs,
            success_source: h.success_source,
            empty_decision_score: h.empty_decision_score,
            metrics_bucket: h.metrics_bucket,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaskGroupingConfig {
    #[serde(flatten)]
    pub params: GroupingParams,
    pub plan: GroupPlan,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub paths: PathsConfig,
    pub model_gateway: GatewayConfig,
    pub skill_retrieval: RetrievalConfig,
    pub reward_engine: RewardSettings,
    pub policy_math: PolicyConfig,
    pub stream_harness: StreamHarnessConfig,
    pub task_grouping: TaskGroupingConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: "<config>".into(),
            message: e.to_string(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        toml::from_str(&text).map_err(|e| ConfigError::Parse {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes to TOML")
    }

    /// Range checks plus existence of every referenced input path.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !self.reward_engine.weights.is_valid() {
            return Err(ConfigError::Invalid("reward weights must be finite and non-negative".into()));
        }
        let eps = self.policy_math.clip_epsilon;
        if !(eps > 0.0 && eps < 1.0) {
            return Err(ConfigError::Invalid(format!("clip_epsilon {eps} is outside (0, 1)")));
        }
        let h = &self.stream_harness;
        if h.max_turns == 0 || h.jobs == 0 || h.metrics_bucket == 0 {
            return Err(ConfigError::Invalid("max_turns, jobs and metrics_bucket must be positive".into()));
        }
        if !(0.0..=1.0).contains(&h.empty_decision_score) {
            return Err(ConfigError::Invalid("empty_decision_score must lie in [0, 1]".into()));
        }
        self.task_grouping
            .params
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;

        let must_exist = |what: &str, path: &Option<PathBuf>| match path {
            Some(p) if !p.exists() => Err(ConfigError::MissingPath {
                what: what.into(),
                path: p.display().to_string(),
            }),
            _ => Ok(()),
        };
        must_exist("corpus", &self.paths.corpus)?;
        must_exist("tasks file", &self.paths.tasks)?;
        must_exist("groups file", &self.paths.groups)?;
        must_exist("prompts directory", &self.model_gateway.prompts_dir)?;
        for role in Role::ALL {
            if let ProviderConfig::Replay { fixtures } = self.model_gateway.provider(role) {
                must_exist(&format!("{role} fixtures"), &Some(fixtures.clone()))?;
            }
        }
        Ok(())
    }

    pub fn harness_params(&self) -> HarnessParams {
        let h = &self.stream_harness;
        HarnessParams {
            top_k: self.skill_retrieval.top_k,
            bm25: Bm25Params {
                k1: self.skill_retrieval.k1,
                b: self.skill_retrieval.b,
            },
            max_turns: h.max_turns,
            history_length: h.history_length,
            benchmark: h.benchmark.clone(),
            success_source: h.success_source,
            empty_decision_score: h.empty_decision_score,
            rollouts: h.group_size,
            jobs: h.jobs,
            reward: self.reward_engine,
            metrics_bucket: h.metrics_bucket,
        }
    }

    pub fn prompts(&self) -> Result<PromptSet, ConfigError> {
        match &self.model_gateway.prompts_dir {
            Some(dir) => PromptSet::load_overrides(dir).map_err(|source| ConfigError::Io {
                path: dir.display().to_string(),
                source,
            }),
            None => Ok(PromptSet::default()),
        }
    }

    pub fn provider(&self, role: Role) -> Result<Arc<dyn ChatProvider>, ConfigError> {
        match self.model_gateway.provider(role) {
            ProviderConfig::None => Err(ConfigError::Unconfigured(role)),
            ProviderConfig::Http(http) => Ok(Arc::new(HttpProvider::new(http.clone()))),
            ProviderConfig::Replay { fixtures } => Ok(Arc::new(ReplayProvider::load(fixtures)?)),
        }
    }

    pub fn clients(&self) -> Result<Clients, ConfigError> {
        Ok(Clients {
            executor: self.provider(Role::Executor)?,
            curator: self.provider(Role::Curator)?,
            judge: self.provider(Role::Judge)?,
        })
    }

    pub fn embedder(&self) -> Box<dyn Embedder> {
        let e = &self.model_gateway.embedder;
        match &e.url {
            Some(url) => Box::new(HttpEmbedder::new(url.clone(), Duration::from_secs(e.timeout_secs))),
            None => Box::new(StubEmbedder::new(e.stub_dim)),
        }
    }
}
