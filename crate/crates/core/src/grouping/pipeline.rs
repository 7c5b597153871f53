//! Dependency gate, pair scoring, candidate retrieval and group building.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::similarity::{matched_count_with, soft_jaccard_with, PhraseSimilarity, PhraseVectors};
use super::{AnnotatedTask, Corpus, CurriculumMode, Dimension, GroupingError, GroupingParams};
use crate::gateway::Embedder;

/// Per-dimension match counts and soft-Jaccard for one ordered pair.
#[derive(Debug, Clone, Copy)]
struct PairStats {
    matched: [usize; 5],
    sj: [f64; 5],
    omega: f64,
}

fn distinct_len(list: &[String]) -> usize {
    list.iter().collect::<HashSet<_>>().len()
}

fn dim_index(d: Dimension) -> usize {
    Dimension::ALL.iter().position(|x| *x == d).expect("known dimension")
}

fn pair_stats(
    s: &AnnotatedTask,
    t: &AnnotatedTask,
    params: &GroupingParams,
    sim: &dyn PhraseSimilarity,
) -> PairStats {
    let mut matched = [0; 5];
    let mut sj = [0.0; 5];
    for (i, d) in Dimension::ALL.into_iter().enumerate() {
        let a = s.attributes.get(d);
        let b = t.attributes.get(d);
        matched[i] = matched_count_with(a, b, params.tau, sim);
        sj[i] = soft_jaccard_with(a, b, params.tau, sim);
    }
    let total = params.weights.sum();
    let omega = Dimension::ALL
        .into_iter()
        .enumerate()
        .map(|(i, d)| params.weights.get(d) / total * sj[i])
        .sum();
    PairStats { matched, sj, omega }
}

/// Convex combination of per-dimension soft-Jaccard scores.
pub fn overall_similarity(
    s: &AnnotatedTask,
    t: &AnnotatedTask,
    params: &GroupingParams,
    sim: &dyn PhraseSimilarity,
) -> f64 {
    pair_stats(s, t, params, sim).omega
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum GateOutcome {
    Pass,
    /// Ids (1-6) of the violated conditions, ascending.
    Fail(Vec<u8>),
}

impl GateOutcome {
    pub fn passed(&self) -> bool {
        matches!(self, GateOutcome::Pass)
    }
}

fn direction_ok(gap: f64, params: &GroupingParams, mode: Option<CurriculumMode>) -> bool {
    match mode {
        None => gap >= params.delta_min,
        Some(CurriculumMode::Up) => {
            gap >= params.delta_min && gap >= params.gap_min && gap <= params.gap_max
        }
        Some(CurriculumMode::Same) => gap.abs() <= params.delta_same,
        Some(CurriculumMode::Down) => gap < 0.0,
    }
}

fn gate_from_stats(
    s: &AnnotatedTask,
    t: &AnnotatedTask,
    stats: &PairStats,
    params: &GroupingParams,
    mode: Option<CurriculumMode>,
) -> GateOutcome {
    let m = |d| stats.matched[dim_index(d)];
    let concepts = m(Dimension::Concepts);
    let skills = m(Dimension::Skills);
    let mut failed = Vec::new();

    if concepts < params.kappa_c || skills < params.kappa_s {
        failed.push(1);
    }
    if m(Dimension::Strategies) + m(Dimension::Pitfalls) < 1 {
        failed.push(2);
    }
    if stats.sj[dim_index(Dimension::Topics)] > params.theta_t || stats.omega > params.sigma_max {
        failed.push(3);
    }
    if stats.omega < params.sigma_min {
        failed.push(4);
    }
    let new_concepts = distinct_len(t.attributes.get(Dimension::Concepts)) > concepts;
    let new_skills = distinct_len(t.attributes.get(Dimension::Skills)) > skills;
    if !(new_concepts || new_skills) {
        failed.push(5);
    }
    if !direction_ok(t.difficulty - s.difficulty, params, mode) {
        failed.push(6);
    }
    if failed.is_empty() {
        GateOutcome::Pass
    } else {
        GateOutcome::Fail(failed)
    }
}

/// The six admissibility conditions with condition 6 as a plain floor
/// (`d_t - d_s >= delta_min`).
pub fn dependency_gate(
    s: &AnnotatedTask,
    t: &AnnotatedTask,
    params: &GroupingParams,
    sim: &dyn PhraseSimilarity,
) -> GateOutcome {
    let stats = pair_stats(s, t, params, sim);
    gate_from_stats(s, t, &stats, params, None)
}

/// The gate with condition 6 replaced by the rule of a curriculum mode.
pub fn dependency_gate_in_mode(
    s: &AnnotatedTask,
    t: &AnnotatedTask,
    params: &GroupingParams,
    mode: CurriculumMode,
    sim: &dyn PhraseSimilarity,
) -> GateOutcome {
    let stats = pair_stats(s, t, params, sim);
    gate_from_stats(s, t, &stats, params, Some(mode))
}

/// Triangular bonus over the gap `d_t - d_s`: 1 at the centre of
/// `[gap_min, gap_max]`, falling linearly to 0 at either edge and staying 0
/// outside.
pub fn difficulty_bonus(d_s: f64, d_t: f64, gap_min: f64, gap_max: f64) -> f64 {
    let gap = d_t - d_s;
    if gap < gap_min || gap > gap_max {
        return 0.0;
    }
    let mid = (gap_min + gap_max) / 2.0;
    let half = (gap_max - gap_min) / 2.0;
    (1.0 - (gap - mid).abs() / half).clamp(0.0, 1.0)
}

fn score_from_stats(s: &AnnotatedTask, t: &AnnotatedTask, stats: &PairStats, params: &GroupingParams) -> f64 {
    let weighted: f64 = Dimension::ALL
        .into_iter()
        .enumerate()
        .map(|(i, d)| params.weights.get(d) * stats.sj[i])
        .sum();
    weighted + params.lambda * difficulty_bonus(s.difficulty, t.difficulty, params.gap_min, params.gap_max)
}

/// Unnormalized weighted soft-Jaccard sum plus the weighted difficulty bonus.
pub fn pair_score(
    s: &AnnotatedTask,
    t: &AnnotatedTask,
    params: &GroupingParams,
    sim: &dyn PhraseSimilarity,
) -> f64 {
    let stats = pair_stats(s, t, params, sim);
    score_from_stats(s, t, &stats, params)
}

/// Exact-phrase postings over concepts, strategies and pitfalls.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InvertedIndex {
    postings: BTreeMap<String, Vec<usize>>,
}

impl InvertedIndex {
    pub fn build(corpus: &Corpus) -> Self {
        let mut postings: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (idx, task) in corpus.tasks().iter().enumerate() {
            let phrases: BTreeSet<&str> = Dimension::DEPENDENCY
                .into_iter()
                .flat_map(|d| task.attributes.get(d).iter().map(String::as_str))
                .collect();
            for phrase in phrases {
                postings.entry(phrase.to_string()).or_default().push(idx);
            }
        }
        Self { postings }
    }

    pub fn is_empty(&self) -> bool {
        self.postings.is_empty()
    }

    pub fn postings(&self, phrase: &str) -> &[usize] {
        self.postings.get(phrase).map_or(&[], Vec::as_slice)
    }

    pub fn phrases(&self) -> impl Iterator<Item = &str> {
        self.postings.keys().map(String::as_str)
    }

    /// Tasks sharing at least one dependency phrase with `source`, minus
    /// the source itself, ascending.
    pub fn candidates(&self, corpus: &Corpus, source: usize) -> Vec<usize> {
        let task = corpus.task(source);
        let mut pool = BTreeSet::new();
        for d in Dimension::DEPENDENCY {
            for phrase in task.attributes.get(d) {
                pool.extend(self.postings(phrase).iter().copied());
            }
        }
        pool.remove(&source);
        pool.into_iter().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceTag {
    Indexed,
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Successor {
    pub index: usize,
    pub id: String,
    pub tag: SourceTag,
    pub mode: CurriculumMode,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStep {
    pub tag: SourceTag,
    pub mode: CurriculumMode,
    pub score: f64,
}

/// An ordered run of related tasks. `steps[i]` describes how
/// `task_ids[i + 1]` was chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskGroup {
    pub group_id: String,
    pub task_ids: Vec<String>,
    pub steps: Vec<GroupStep>,
}

impl TaskGroup {
    pub fn len(&self) -> usize {
        self.task_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.task_ids.is_empty()
    }

    pub fn tags(&self) -> Vec<SourceTag> {
        self.steps.iter().map(|s| s.tag).collect()
    }

    /// JSONL record `{group_id, task_ids, tags, modes}`.
    pub fn to_record(&self) -> serde_json::Value {
        serde_json::json!({
            "group_id": self.group_id,
            "task_ids": self.task_ids,
            "tags": self.tags(),
            "modes": self.steps.iter().map(|s| s.mode).collect::<Vec<_>>(),
        })
    }
}

/// Group length: fixed, or drawn uniformly from an inclusive range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GroupSize {
    Fixed(usize),
    Range { min: usize, max: usize },
}

impl Default for GroupSize {
    fn default() -> Self {
        GroupSize::Fixed(10)
    }
}

impl GroupSize {
    fn draw(&self, rng: &mut ChaCha8Rng) -> usize {
        match *self {
            GroupSize::Fixed(n) => n,
            GroupSize::Range { min, max } => rng.random_range(min..=max.max(min)),
        }
    }

    fn minimum(&self) -> usize {
        match *self {
            GroupSize::Fixed(n) => n,
            GroupSize::Range { min, .. } => min,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GroupPlan {
    pub size: GroupSize,
    pub seed: u64,
    /// Stop after this many groups; `None` seeds until every task is in a
    /// group.
    pub max_groups: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupingRun {
    pub groups: Vec<TaskGroup>,
    /// Seeds for which no successor could be found.
    pub singleton_seeds: Vec<String>,
}

/// The grouping pipeline bound to one corpus, parameter set and phrase
/// similarity.
pub struct Grouper<'a, S: PhraseSimilarity = PhraseVectors> {
    corpus: &'a Corpus,
    params: GroupingParams,
    sim: S,
    index: InvertedIndex,
}

impl<'a> Grouper<'a, PhraseVectors> {
    /// Embeds every phrase of the corpus once and builds the index.
    pub fn with_embedder(
        corpus: &'a Corpus,
        params: GroupingParams,
        embedder: &dyn Embedder,
    ) -> Result<Self, GroupingError> {
        let vectors = PhraseVectors::build(
            corpus.tasks().iter().flat_map(|t| t.attributes.phrases()),
            embedder,
        )?;
        Self::new(corpus, params, vectors)
    }
}

impl<'a, S: PhraseSimilarity> Grouper<'a, S> {
    pub fn new(corpus: &'a Corpus, params: GroupingParams, sim: S) -> Result<Self, GroupingError> {
        params.validate()?;
        Ok(Self {
            corpus,
            params,
            sim,
            index: InvertedIndex::build(corpus),
        })
    }

    pub fn corpus(&self) -> &Corpus {
        self.corpus
    }

    pub fn params(&self) -> &GroupingParams {
        &self.params
    }

    pub fn similarity(&self) -> &S {
        &self.sim
    }

    pub fn index(&self) -> &InvertedIndex {
        &self.index
    }

    pub fn gate(&self, source: usize, candidate: usize, mode: Option<CurriculumMode>) -> GateOutcome {
        let s = self.corpus.task(source);
        let t = self.corpus.task(candidate);
        let stats = pair_stats(s, t, &self.params, &self.sim);
        gate_from_stats(s, t, &stats, &self.params, mode)
    }

    pub fn score(&self, source: usize, candidate: usize) -> f64 {
        let s = self.corpus.task(source);
        let t = self.corpus.task(candidate);
        score_from_stats(s, t, &pair_stats(s, t, &self.params, &self.sim), &self.params)
    }

    /// Best admissible candidate from `pool`: highest score, ties by
    /// ascending id.
    fn best_of(&self, source: usize, pool: &[usize], mode: CurriculumMode) -> Option<(usize, f64)> {
        let s = self.corpus.task(source);
        let mut best: Option<(usize, f64)> = None;
        for &candidate in pool {
            let t = self.corpus.task(candidate);
            let stats = pair_stats(s, t, &self.params, &self.sim);
            if !gate_from_stats(s, t, &stats, &self.params, Some(mode)).passed() {
                continue;
            }
            let score = score_from_stats(s, t, &stats, &self.params);
            let better = match best {
                None => true,
                Some((idx, best_score)) => {
                    score > best_score
                        || (score == best_score && t.id < self.corpus.task(idx).id)
                }
            };
            if better {
                best = Some((candidate, score));
            }
        }
        best
    }

    fn subsample(pool: Vec<usize>, cap: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
        if pool.len() <= cap {
            return pool;
        }
        let mut picked: Vec<usize> = sample(rng, pool.len(), cap)
            .into_iter()
            .map(|i| pool[i])
            .collect();
        picked.sort_unstable();
        picked
    }

    /// Picks the next task after `source`.
    ///
    /// Draws a curriculum mode, then searches the (capped) inverted-index
    /// pool; if nothing there passes the gate, searches a uniform pool of
    /// up to `fallback_pool` other tasks. Tasks in `excluded` are never
    /// returned.
    pub fn sample_successor(
        &self,
        source: usize,
        excluded: &HashSet<usize>,
        rng: &mut ChaCha8Rng,
    ) -> Option<Successor> {
        let mode = self.params.mode_probs.pick(rng.random::<f64>());
        let indexed: Vec<usize> = self
            .index
            .candidates(self.corpus, source)
            .into_iter()
            .filter(|c| !excluded.contains(c))
            .collect();
        let indexed = Self::subsample(indexed, self.params.k_inv, rng);
        let found = |index: usize, score: f64, tag| Successor {
            index,
            id: self.corpus.task(index).id.clone(),
            tag,
            mode,
            score,
        };
        if let Some((idx, score)) = self.best_of(source, &indexed, mode) {
            return Some(found(idx, score, SourceTag::Indexed));
        }

        let tried: HashSet<usize> = indexed.into_iter().collect();
        let others: Vec<usize> = (0..self.corpus.len())
            .filter(|i| *i != source && !excluded.contains(i) && !tried.contains(i))
            .collect();
        let fallback = Self::subsample(others, self.params.fallback_pool, rng);
        self.best_of(source, &fallback, mode)
            .map(|(idx, score)| found(idx, score, SourceTag::Fallback))
    }

    fn grow(&self, seed: usize, target: usize, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<GroupStep>) {
        let mut members = vec![seed];
        let mut excluded: HashSet<usize> = HashSet::from([seed]);
        let mut steps = Vec::new();
        while members.len() < target {
            let tail = *members.last().expect("group has a seed");
            let Some(next) = self.sample_successor(tail, &excluded, rng) else {
                break;
            };
            excluded.insert(next.index);
            members.push(next.index);
            steps.push(GroupStep {
                tag: next.tag,
                mode: next.mode,
                score: next.score,
            });
        }
        (members, steps)
    }

    /// Grows one group of up to `length` tasks from `seed_id`.
    pub fn build_group(&self, seed_id: &str, length: usize, rng_seed: u64) -> Result<TaskGroup, GroupingError> {
        if length < 2 {
            return Err(GroupingError::InvalidLength(length));
        }
        let seed = self
            .corpus
            .index_of(seed_id)
            .ok_or_else(|| GroupingError::SeedNotInCorpus(seed_id.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let (members, steps) = self.grow(seed, length, &mut rng);
        Ok(self.group(seed_id.to_string(), members, steps))
    }

    fn group(&self, group_id: String, members: Vec<usize>, steps: Vec<GroupStep>) -> TaskGroup {
        TaskGroup {
            group_id,
            task_ids: members
                .into_iter()
                .map(|i| self.corpus.task(i).id.clone())
                .collect(),
            steps,
        }
    }

    /// Seeds groups round-robin from tasks not yet placed in any group, in
    /// corpus order. Group `g` uses its own rng stream derived from
    /// `plan.seed`. Tasks may appear in several groups; seeds with no
    /// admissible successor are reported instead of emitted.
    pub fn build_groups(&self, plan: &GroupPlan) -> Result<GroupingRun, GroupingError> {
        if plan.size.minimum() < 2 {
            return Err(GroupingError::InvalidLength(plan.size.minimum()));
        }
        let mut grouped = vec![false; self.corpus.len()];
        let mut groups = Vec::new();
        let mut singleton_seeds = Vec::new();
        let mut stream = 0u64;
        for seed in 0..self.corpus.len() {
            if plan.max_groups.is_some_and(|max| groups.len() >= max) {
                break;
            }
            if grouped[seed] {
                continue;
            }
            let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
            rng.set_stream(stream);
            stream += 1;
            let target = plan.size.draw(&mut rng);
            let (members, steps) = self.grow(seed, target, &mut rng);
            grouped[seed] = true;
            if members.len() < 2 {
                singleton_seeds.push(self.corpus.task(seed).id.clone());
                continue;
            }
            for &m in &members {
                grouped[m] = true;
            }
            let id = format!("g{:05}", groups.len());
            groups.push(self.group(id, members, steps));
        }
        Ok(GroupingRun {
            groups,
            singleton_seeds,
        })
    }
}

/// One-shot helper: embeds the corpus and grows a single group.
pub fn build_group(
    seed_id: &str,
    length: usize,
    corpus: &Corpus,
    params: &GroupingParams,
    embedder: &dyn Embedder,
    rng_seed: u64,
) -> Result<TaskGroup, GroupingError> {
    Grouper::with_embedder(corpus, params.clone(), embedder)?.build_group(seed_id, length, rng_seed)
}

pub fn build_groups(
    corpus: &Corpus,
    params: &GroupingParams,
    embedder: &dyn Embedder,
    plan: &GroupPlan,
) -> Result<GroupingRun, GroupingError> {
    Grouper::with_embedder(corpus, params.clone(), embedder)?.build_groups(plan)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelGroup {
    pub label: String,
    pub task_ids: Vec<String>,
}

/// Partitions `(id, label)` pairs by label. Groups appear in order of each
/// label's first occurrence; members keep input order.
pub fn group_by_label<I, S>(tasks: I) -> Result<Vec<LabelGroup>, GroupingError>
where
    I: IntoIterator<Item = (S, Option<S>)>,
    S: Into<String>,
{
    let mut groups: Vec<LabelGroup> = Vec::new();
    let mut position: BTreeMap<String, usize> = BTreeMap::new();
    for (id, label) in tasks {
        let id = id.into();
        let label = label
            .map(Into::into)
            .filter(|l: &String| !l.trim().is_empty())
            .ok_or_else(|| GroupingError::UnlabeledTask(id.clone()))?;
        let slot = *position.entry(label.clone()).or_insert_with(|| {
            groups.push(LabelGroup {
                label: label.clone(),
                task_ids: Vec::new(),
            });
            groups.len() - 1
        });
        groups[slot].task_ids.push(id);
    }
    Ok(groups)
}

#[cfg(test)]
mod tests {
    use super::super::AttributeSet;
    use super::*;

    fn phrases(items: &[&str]) -> Vec<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    fn task(id: &str, difficulty: f64, c: &[&str], s: &[&str], r: &[&str], p: &[&str], t: &[&str]) -> AnnotatedTask {
        AnnotatedTask {
            id: id.into(),
            text: String::new(),
            difficulty,
            attributes: AttributeSet {
                topics: phrases(t),
                skills: phrases(s),
                concepts: phrases(c),
                strategies: phrases(r),
                pitfalls: phrases(p),
            },
        }
    }

    fn exact(a: &str, b: &str) -> f64 {
        if a == b { 1.0 } else { 0.0 }
    }

    #[test]
    fn identical_task_fails_near_duplicate_and_progression() {
        let s = task("s", 1.0, &["c1"], &["s1"], &["r1"], &["p1"], &["t1"]);
        let outcome = dependency_gate(&s, &s.clone(), &GroupingParams::default(), &exact);
        assert_eq!(outcome, GateOutcome::Fail(vec![3, 5]));
    }

    #[test]
    fn no_shared_concepts_fails_foundation() {
        let s = task("s", 1.0, &["c1"], &["s1", "s2"], &["r1"], &["p1"], &["t1"]);
        let t = task("t", 1.0, &["c2"], &["s1", "s3"], &["r1"], &["p1"], &["t2"]);
        assert_eq!(dependency_gate(&s, &t, &GroupingParams::default(), &exact), GateOutcome::Fail(vec![1]));
    }

    #[test]
    fn bonus_triangle() {
        assert_eq!(difficulty_bonus(0.0, 1.75, 0.5, 3.0), 1.0);
        assert_eq!(difficulty_bonus(0.0, 0.5, 0.5, 3.0), 0.0);
        assert_eq!(difficulty_bonus(0.0, 3.0, 0.5, 3.0), 0.0);
        assert_eq!(difficulty_bonus(0.0, 4.0, 0.5, 3.0), 0.0);
        assert_eq!(difficulty_bonus(0.0, -1.0, 0.5, 3.0), 0.0);
        assert!((difficulty_bonus(1.0, 2.125, 0.5, 3.0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn omega_and_score_arithmetic() {
        let s = task("s", 0.0, &["c"], &["s1"], &["r1"], &["p1"], &["t1"]);
        let t = task("t", 1.75, &["c"], &["s2"], &["r2"], &["p2"], &["t2"]);
        let params = GroupingParams::default();
        assert!((overall_similarity(&s, &t, &params, &exact) - 5.0 / 15.0).abs() < 1e-15);
        assert_eq!(pair_score(&s, &t, &params, &exact), 5.0 + 1.0);
        let same = task("u", 1.75, &["c"], &["s1"], &["r1"], &["p1"], &["t1"]);
        assert_eq!(overall_similarity(&s, &same, &params, &exact), 1.0);
        assert_eq!(pair_score(&s, &same, &params, &exact), 16.0);
    }

    #[test]
    fn mode_rules_for_condition_six() {
        let p = GroupingParams::default();
        assert!(direction_ok(1.0, &p, Some(CurriculumMode::Up)));
        assert!(!direction_ok(0.2, &p, Some(CurriculumMode::Up)));
        assert!(!direction_ok(3.5, &p, Some(CurriculumMode::Up)));
        assert!(direction_ok(-0.3, &p, Some(CurriculumMode::Same)));
        assert!(!direction_ok(0.31, &p, Some(CurriculumMode::Same)));
        assert!(direction_ok(-0.1, &p, Some(CurriculumMode::Down)));
        assert!(!direction_ok(0.0, &p, Some(CurriculumMode::Down)));
        assert!(direction_ok(0.0, &p, None));
        assert!(!direction_ok(-0.1, &p, None));
    }

    #[test]
    fn label_partition() {
        let groups = group_by_label([("t1", Some("pick")), ("t2", Some("pick")), ("t3", Some("clean"))]).unwrap();
        assert_eq!(groups, vec![
            LabelGroup { label: "pick".into(), task_ids: vec!["t1".into(), "t2".into()] },
            LabelGroup { label: "clean".into(), task_ids: vec!["t3".into()] },
        ]);
        assert_eq!(group_by_label([("a", Some("x")), ("b", Some("x"))]).unwrap().len(), 1);
        assert!(group_by_label(Vec::<(&str, Option<&str>)>::new()).unwrap().is_empty());
        assert!(matches!(
            group_by_label([("a", Some("x")), ("b", None)]),
            Err(GroupingError::UnlabeledTask(id)) if id == "b"
        ));
    }

    #[test]
    fn inverted_index_routes_through_dependency_fields() {
        let corpus = Corpus::new(vec![
            task("a", 0.0, &["modular arithmetic"], &["s"], &[], &[], &["shared topic"]),
            task("b", 0.0, &["modular arithmetic"], &["s"], &[], &[], &["shared topic"]),
            task("c", 0.0, &["other"], &["s"], &[], &[], &["shared topic"]),
        ])
        .unwrap();
        let index = InvertedIndex::build(&corpus);
        assert_eq!(index.postings("modular arithmetic"), &[0, 1]);
        assert!(index.postings("shared topic").is_empty());
        assert!(index.postings("s").is_empty());
        assert_eq!(index.candidates(&corpus, 0), vec![1]);
        assert!(index.candidates(&corpus, 2).is_empty());
        assert!(InvertedIndex::build(&Corpus::default()).is_empty());
    }
}
