//! Model clients for the executor, curator, judge and annotator roles, and
//! the phrase embedder used by task grouping.
//!
//! Every role goes through [`ChatProvider`]. Implementations:
//!
//! * [`HttpProvider`] speaks the chat-completions JSON layout,
//! * [`ReplayProvider`] answers from recorded fixtures and fails loudly on
//!   a miss,
//! * [`RecordingProvider`] wraps another provider and captures fixtures,
//! * [`ScriptedProvider`] answers from a closure (tests, dry runs).

mod chat;
mod embed;
mod http;
mod judge;
pub mod stub;

pub use chat::{
    request_hash, ChatProvider, ChatRequest, ChatResponse, FixtureRecord, Message,
    RecordingProvider, ReplayProvider, Role, ScriptedProvider,
};
pub use embed::{cosine, Embedder, EmbeddingBatch, HttpEmbedder, StubEmbedder, DEFAULT_STUB_DIM};
pub use http::{HttpProvider, HttpProviderConfig};
pub use judge::{
    annotate, extract_json_object, judge_score, parse_judge_score, parse_verdict,
    self_judge_success,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GatewayError {
    #[error("{role} provider unreachable: {detail}")]
    ProviderUnreachable { role: String, detail: String },
    #[error("malformed provider response: {0}")]
    MalformedResponse(String),
    #[error("no fixture for role `{role}` with request hash {hash}")]
    FixtureMiss { role: String, hash: String },
    #[error("embedding service unreachable: {0}")]
    EmbedServiceUnreachable(String),
    #[error("embedding dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("fixture file error: {0}")]
    Fixture(String),
}
