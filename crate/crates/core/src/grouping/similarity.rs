//! Matched-pair counts and soft-Jaccard over phrase lists.

use std::collections::{HashMap, HashSet};

use super::GroupingError;
use crate::gateway::{cosine, Embedder};

/// Cosine similarity between two phrases.
pub trait PhraseSimilarity {
    fn similarity(&self, a: &str, b: &str) -> f64;
}

/// Cached phrase embeddings.
#[derive(Debug, Clone, Default)]
pub struct PhraseVectors {
    vectors: HashMap<String, Vec<f64>>,
}

impl PhraseVectors {
    /// Embeds every distinct phrase once.
    pub fn build<'a, I>(phrases: I, embedder: &dyn Embedder) -> Result<Self, GroupingError>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut seen = HashSet::new();
        let distinct: Vec<String> = phrases
            .into_iter()
            .filter(|p| seen.insert(*p))
            .map(str::to_string)
            .collect();
        let batch = embedder.embed(&distinct)?;
        batch.validate()?;
        Ok(Self {
            vectors: batch.phrases.into_iter().zip(batch.vectors).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vector(&self, phrase: &str) -> Option<&[f64]> {
        self.vectors.get(phrase).map(Vec::as_slice)
    }
}

impl PhraseSimilarity for PhraseVectors {
    fn similarity(&self, a: &str, b: &str) -> f64 {
        if a == b {
            return 1.0;
        }
        match (self.vectors.get(a), self.vectors.get(b)) {
            (Some(x), Some(y)) => cosine(x, y),
            _ => 0.0,
        }
    }
}

impl<F: Fn(&str, &str) -> f64> PhraseSimilarity for F {
    fn similarity(&self, a: &str, b: &str) -> f64 {
        self(a, b)
    }
}

fn distinct(list: &[String]) -> Vec<&str> {
    let mut seen = HashSet::new();
    list.iter()
        .map(String::as_str)
        .filter(|p| seen.insert(*p))
        .collect()
}

/// Exact matches plus a greedy one-to-one matching of the remaining
/// phrases: all cross pairs at or above `tau` are taken in descending
/// cosine order (ties by list position), each phrase used at most once.
/// Lists are treated as sets.
pub fn matched_count_with(a: &[String], b: &[String], tau: f64, sim: &dyn PhraseSimilarity) -> usize {
    let a = distinct(a);
    let b = distinct(b);
    let b_set: HashSet<&str> = b.iter().copied().collect();
    let a_set: HashSet<&str> = a.iter().copied().collect();
    let exact = a.iter().filter(|p| b_set.contains(*p)).count();
    let rest_a: Vec<&str> = a.iter().copied().filter(|p| !b_set.contains(p)).collect();
    let rest_b: Vec<&str> = b.iter().copied().filter(|p| !a_set.contains(p)).collect();

    let mut pairs = Vec::new();
    for (i, pa) in rest_a.iter().enumerate() {
        for (j, pb) in rest_b.iter().enumerate() {
            let c = sim.similarity(pa, pb);
            if c >= tau {
                pairs.push((c, i, j));
            }
        }
    }
    pairs.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut used_a = vec![false; rest_a.len()];
    let mut used_b = vec![false; rest_b.len()];
    let mut fuzzy = 0;
    for (_, i, j) in pairs {
        if !used_a[i] && !used_b[j] {
            used_a[i] = true;
            used_b[j] = true;
            fuzzy += 1;
        }
    }
    exact + fuzzy
}

/// `m / (|A| + |B| - m)`; two empty lists are identical (1.0).
pub fn soft_jaccard_with(a: &[String], b: &[String], tau: f64, sim: &dyn PhraseSimilarity) -> f64 {
    let size_a = distinct(a).len();
    let size_b = distinct(b).len();
    if size_a + size_b == 0 {
        return 1.0;
    }
    let m = matched_count_with(a, b, tau, sim);
    m as f64 / (size_a + size_b - m) as f64
}

fn vectors_for(a: &[String], b: &[String], embedder: &dyn Embedder) -> Result<PhraseVectors, GroupingError> {
    PhraseVectors::build(a.iter().chain(b).map(String::as_str), embedder)
}

pub fn matched_count(a: &[String], b: &[String], tau: f64, embedder: &dyn Embedder) -> Result<usize, GroupingError> {
    let vectors = vectors_for(a, b, embedder)?;
    Ok(matched_count_with(a, b, tau, &vectors))
}

pub fn soft_jaccard(a: &[String], b: &[String], tau: f64, embedder: &dyn Embedder) -> Result<f64, GroupingError> {
    let vectors = vectors_for(a, b, embedder)?;
    Ok(soft_jaccard_with(a, b, tau, &vectors))
}
