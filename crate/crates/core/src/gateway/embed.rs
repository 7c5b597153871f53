use std::collections::BTreeMap;
use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use super::GatewayError;

pub const DEFAULT_STUB_DIM: usize = 384;
const UNIT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingBatch {
    pub phrases: Vec<String>,
    pub vectors: Vec<Vec<f64>>,
}

impl EmbeddingBatch {
    /// Checks one vector per phrase, a shared dimension, and unit norm.
    pub fn validate(&self) -> Result<usize, GatewayError> {
        if self.phrases.len() != self.vectors.len() {
            return Err(GatewayError::DimensionMismatch(format!(
                "{} phrases but {} vectors",
                self.phrases.len(),
                self.vectors.len()
            )));
        }
        let dim = self.vectors.first().map_or(0, Vec::len);
        for (phrase, v) in self.phrases.iter().zip(&self.vectors) {
            if v.len() != dim {
                return Err(GatewayError::DimensionMismatch(format!(
                    "vector for {phrase:?} has dimension {}, expected {dim}",
                    v.len()
                )));
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > UNIT_TOLERANCE {
                return Err(GatewayError::DimensionMismatch(format!(
                    "vector for {phrase:?} has norm {norm}"
                )));
            }
        }
        Ok(dim)
    }
}

pub trait Embedder: Send + Sync {
    fn embed(&self, phrases: &[String]) -> Result<EmbeddingBatch, GatewayError>;
}

/// Dot product; equals cosine similarity for unit vectors.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

/// Deterministic offline embedder.
///
/// Each phrase is hashed to the seed of a Gaussian vector, so distinct
/// phrases are nearly orthogonal (|cos| around `1/sqrt(dim)`, far below any
/// useful matching threshold) and equal phrases map to equal vectors.
/// An alias pins a phrase at an exact cosine to an anchor phrase, which is
/// how tests express "these two phrases mean the same thing".
#[derive(Debug, Clone, PartialEq)]
pub struct StubEmbedder {
    dim: usize,
    aliases: BTreeMap<String, (String, f64)>,
}

impl Default for StubEmbedder {
    fn default() -> Self {
        Self::new(DEFAULT_STUB_DIM)
    }
}

impl StubEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim >= 2, "stub embedder needs at least two dimensions");
        Self {
            dim,
            aliases: BTreeMap::new(),
        }
    }

    /// Makes `phrase` sit at cosine `similarity` to `anchor`.
    pub fn with_alias(mut self, phrase: &str, anchor: &str, similarity: f64) -> Self {
        assert!((-1.0..=1.0).contains(&similarity));
        self.aliases
            .insert(phrase.to_string(), (anchor.to_string(), similarity));
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn base_vector(&self, phrase: &str) -> Vec<f64> {
        let digest = Sha256::digest(phrase.as_bytes());
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&digest);
        let mut rng = ChaCha8Rng::from_seed(seed);
        normalize(
            (0..self.dim)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect(),
        )
    }

    pub fn vector(&self, phrase: &str) -> Vec<f64> {
        let Some((anchor, similarity)) = self.aliases.get(phrase) else {
            return self.base_vector(phrase);
        };
        let a = self.base_vector(anchor);
        let own = self.base_vector(phrase);
        let along = cosine(&own, &a);
        let orthogonal = normalize(own.iter().zip(&a).map(|(o, x)| o - along * x).collect());
        let rest = (1.0 - similarity * similarity).max(0.0).sqrt();
        normalize(
            a.iter()
                .zip(&orthogonal)
                .map(|(x, u)| similarity * x + rest * u)
                .collect(),
        )
    }
}

impl Embedder for StubEmbedder {
    fn embed(&self, phrases: &[String]) -> Result<EmbeddingBatch, GatewayError> {
        Ok(EmbeddingBatch {
            phrases: phrases.to_vec(),
            vectors: phrases.iter().map(|p| self.vector(p)).collect(),
        })
    }
}

/// Client for an embedding sidecar: `POST <url>/embed` with
/// `{"phrases": [...]}` returning `{"vectors": [[...]], "dim": n}`.
pub struct HttpEmbedder {
    url: String,
    agent: ureq::Agent,
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
    dim: usize,
}

impl HttpEmbedder {
    pub fn new(url: impl Into<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            url: url.into(),
            agent,
        }
    }
}

impl Embedder for HttpEmbedder {
    fn embed(&self, phrases: &[String]) -> Result<EmbeddingBatch, GatewayError> {
        if phrases.is_empty() {
            return Ok(EmbeddingBatch {
                phrases: Vec::new(),
                vectors: Vec::new(),
            });
        }
        let url = format!("{}/embed", self.url.trim_end_matches('/'));
        let mut response = self
            .agent
            .post(&url)
            .send_json(json!({ "phrases": phrases }))
            .map_err(|e| GatewayError::EmbedServiceUnreachable(e.to_string()))?;
        let status = response.status().as_u16();
        let body = response
            .body_mut()
            .read_to_string()
            .map_err(|e| GatewayError::EmbedServiceUnreachable(e.to_string()))?;
        if status != 200 {
            return Err(GatewayError::EmbedServiceUnreachable(format!(
                "HTTP {status}: {body}"
            )));
        }
        let parsed: EmbedResponse = serde_json::from_str(&body)
            .map_err(|e| GatewayError::MalformedResponse(format!("embed response: {e}")))?;
        let batch = EmbeddingBatch {
            phrases: phrases.to_vec(),
            vectors: parsed.vectors,
        };
        let dim = batch.validate()?;
        if dim != parsed.dim {
            return Err(GatewayError::DimensionMismatch(format!(
                "service advertised dimension {} but sent {dim}",
                parsed.dim
            )));
        }
        Ok(batch)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::stub::StubServer;

    fn phrases(items: &[&str]) -> Vec<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn stub_is_deterministic_and_unit_norm() {
        let stub = StubEmbedder::default();
        let batch = stub.embed(&phrases(&["induction", "induction", "algebra"])).unwrap();
        assert_eq!(batch.validate().unwrap(), DEFAULT_STUB_DIM);
        assert_eq!(batch.vectors[0], batch.vectors[1]);
        assert!((cosine(&batch.vectors[0], &batch.vectors[1]) - 1.0).abs() < 1e-12);
        assert!(cosine(&batch.vectors[0], &batch.vectors[2]).abs() < 0.6);
    }

    #[test]
    fn alias_pins_cosine() {
        let stub = StubEmbedder::default().with_alias("counting argument", "pigeonhole principle", 0.8);
        let a = stub.vector("pigeonhole principle");
        let b = stub.vector("counting argument");
        assert!((cosine(&a, &b) - 0.8).abs() < 1e-12);
    }

    #[test]
    fn validate_catches_bad_batches() {
        let bad = EmbeddingBatch {
            phrases: phrases(&["a"]),
            vectors: vec![vec![2.0, 0.0]],
        };
        assert!(matches!(bad.validate(), Err(GatewayError::DimensionMismatch(_))));
        let ragged = EmbeddingBatch {
            phrases: phrases(&["a", "b"]),
            vectors: vec![vec![1.0, 0.0], vec![1.0]],
        };
        assert!(matches!(ragged.validate(), Err(GatewayError::DimensionMismatch(_))));
    }

    #[test]
    fn http_embedder_round_trip_against_stub_server() {
        let stub = StubEmbedder::new(8);
        let server = StubServer::start(move |method, path, body| {
            assert_eq!((method, path), ("POST", "/embed"));
            let req: serde_json::Value = serde_json::from_str(body).unwrap();
            let phrases: Vec<String> = serde_json::from_value(req["phrases"].clone()).unwrap();
            let batch = stub.embed(&phrases).unwrap();
            (200, json!({"vectors": batch.vectors, "dim": 8, "model": "stub"}).to_string())
        })
        .unwrap();
        let client = HttpEmbedder::new(server.url(), Duration::from_secs(5));
        let batch = client.embed(&phrases(&["a", "b", "c"])).unwrap();
        assert_eq!(batch.vectors.len(), 3);
        assert!(batch.vectors.iter().all(|v| v.len() == 8));
    }

    #[test]
    fn http_embedder_reports_unreachable_and_mismatch() {
        let server = StubServer::start(|_, _, _| (200, r#"{"vectors": [[1.0, 0.0]], "dim": 3}"#.into())).unwrap();
        let client = HttpEmbedder::new(server.url(), Duration::from_secs(5));
        assert!(matches!(
            client.embed(&phrases(&["a"])),
            Err(GatewayError::DimensionMismatch(_))
        ));
        let url = server.url();
        drop(server);
        let client = HttpEmbedder::new(url, Duration::from_secs(2));
        assert!(matches!(
            client.embed(&phrases(&["a"])),
            Err(GatewayError::EmbedServiceUnreachable(_))
        ));
    }
}
