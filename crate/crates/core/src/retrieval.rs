//! BM25 retrieval over the skill repository.
//!
//! Each skill is indexed as the token stream of its name, description and
//! body. Scores use the non-negative IDF variant
//! `ln(1 + (N - df + 0.5) / (df + 0.5))`, so no term can lower a score.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::skill_store::SkillRepo;

/// Lowercases and splits on every non-alphanumeric character.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.2, b: 0.75 }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SkillIndex {
    postings: BTreeMap<String, BTreeMap<String, u32>>,
    doc_lengths: BTreeMap<String, usize>,
    avg_length: f64,
    params: Bm25Params,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredSkill {
    pub name: String,
    pub score: f64,
}

impl SkillIndex {
    pub fn build(repo: &SkillRepo) -> Self {
        Self::build_with(repo, Bm25Params::default())
    }

    pub fn build_with(repo: &SkillRepo, params: Bm25Params) -> Self {
        let mut postings: BTreeMap<String, BTreeMap<String, u32>> = BTreeMap::new();
        let mut doc_lengths = BTreeMap::new();
        for skill in repo.iter() {
            let mut tokens = tokenize(skill.name());
            tokens.extend(tokenize(skill.description()));
            tokens.extend(tokenize(skill.body()));
            doc_lengths.insert(skill.name().to_string(), tokens.len());
            for token in tokens {
                *postings
                    .entry(token)
                    .or_default()
                    .entry(skill.name().to_string())
                    .or_insert(0) += 1;
            }
        }
        let avg_length = if doc_lengths.is_empty() {
            0.0
        } else {
            doc_lengths.values().sum::<usize>() as f64 / doc_lengths.len() as f64
        };
        Self {
            postings,
            doc_lengths,
            avg_length,
            params,
        }
    }

    pub fn corpus_size(&self) -> usize {
        self.doc_lengths.len()
    }

    pub fn avg_length(&self) -> f64 {
        self.avg_length
    }

    pub fn doc_length(&self, name: &str) -> Option<usize> {
        self.doc_lengths.get(name).copied()
    }

    pub fn document_frequency(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, BTreeMap::len)
    }

    /// Per-skill frequencies of `term`.
    pub fn postings(&self, term: &str) -> Option<&BTreeMap<String, u32>> {
        self.postings.get(term)
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.postings.keys().map(String::as_str)
    }

    pub fn idf(&self, term: &str) -> f64 {
        let n = self.corpus_size() as f64;
        let df = self.document_frequency(term) as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    /// Scores every skill sharing at least one term with `query`. Repeated
    /// query terms contribute once.
    pub fn score_all(&self, query: &str) -> BTreeMap<String, f64> {
        let Bm25Params { k1, b } = self.params;
        let terms: BTreeSet<String> = tokenize(query).into_iter().collect();
        let mut scores: BTreeMap<String, f64> = BTreeMap::new();
        for term in &terms {
            let Some(posting) = self.postings.get(term) else {
                continue;
            };
            let idf = self.idf(term);
            for (name, &tf) in posting {
                let tf = tf as f64;
                let len = self.doc_lengths[name] as f64;
                let norm = k1 * (1.0 - b + b * len / self.avg_length);
                *scores.entry(name.clone()).or_insert(0.0) += idf * tf * (k1 + 1.0) / (tf + norm);
            }
        }
        scores
    }

    /// Top-`k` skills by descending score, ties by ascending name. Skills
    /// scoring zero are never returned.
    pub fn retrieve(&self, query: &str, k: usize) -> Vec<ScoredSkill> {
        let mut ranked: Vec<ScoredSkill> = self
            .score_all(query)
            .into_iter()
            .filter(|(_, score)| *score > 0.0)
            .map(|(name, score)| ScoredSkill { name, score })
            .collect();
        ranked.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.name.cmp(&b.name)));
        ranked.truncate(k);
        ranked
    }
}

/// Convenience wrapper: index `repo` and retrieve in one call.
pub fn retrieve(repo: &SkillRepo, query: &str, k: usize) -> Vec<ScoredSkill> {
    SkillIndex::build(repo).retrieve(query, k)
}
