//! Reward-model evaluation: argmax accuracy over four-candidate benchmark
//! instances, Best-of-N selection and head-to-head comparison against a
//! human ranking.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::{self, Write as _};
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Source, StoryRecord};
use crate::digest::hash64;
use crate::dimcat::CategorizationTrace;
use crate::dimension::Dimension;
use crate::error::{Error, Result};
use crate::rankagree::Ranking;

pub const BENCHMARK_CANDIDATES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subset {
    LlmLlm,
    HumanLlm,
}

impl Subset {
    pub fn as_str(self) -> &'static str {
        match self {
            Subset::LlmLlm => "llm_llm",
            Subset::HumanLlm => "human_llm",
        }
    }

    /// Human–LLM iff the chosen story is human and every other one is not.
    pub fn classify(sources: &[&Source], chosen_index: usize) -> Subset {
        let chosen_human = sources[chosen_index].is_human();
        let others_model = sources
            .iter()
            .enumerate()
            .all(|(i, s)| i == chosen_index || !s.is_human());
        if chosen_human && others_model {
            Subset::HumanLlm
        } else {
            Subset::LlmLlm
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchCandidate {
    pub id: String,
    pub text: String,
    pub source: Source,
}

impl From<&StoryRecord> for BenchCandidate {
    fn from(s: &StoryRecord) -> Self {
        BenchCandidate {
            id: s.id.clone(),
            text: s.text().to_string(),
            source: s.source.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawInstance")]
pub struct BenchmarkInstance {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub premise_id: Option<String>,
    pub premise: String,
    pub candidates: Vec<BenchCandidate>,
    pub chosen_index: usize,
    pub dimension: Dimension,
    pub subset: Subset,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<CategorizationTrace>,
}

#[derive(Deserialize)]
struct RawInstance {
    #[serde(default)]
    premise_id: Option<String>,
    premise: String,
    candidates: Vec<BenchCandidate>,
    chosen_index: usize,
    dimension: Dimension,
    subset: Subset,
    #[serde(default)]
    trace: Option<CategorizationTrace>,
}

impl TryFrom<RawInstance> for BenchmarkInstance {
    type Error = Error;

    fn try_from(r: RawInstance) -> Result<Self> {
        let inst = BenchmarkInstance {
            premise_id: r.premise_id,
            premise: r.premise,
            candidates: r.candidates,
            chosen_index: r.chosen_index,
            dimension: r.dimension,
            subset: r.subset,
            trace: r.trace,
        };
        inst.validate()?;
        Ok(inst)
    }
}

impl BenchmarkInstance {
    /// Builds an instance, deriving the subset from the candidates' sources.
    pub fn new(premise: impl Into<String>, candidates: Vec<BenchCandidate>, chosen_index: usize, dimension: Dimension) -> Result<Self> {
        if chosen_index >= candidates.len() {
            return Err(Error::Invalid(format!(
                "chosen index {chosen_index} out of range for {} candidates",
                candidates.len()
            )));
        }
        let sources: Vec<&Source> = candidates.iter().map(|c| &c.source).collect();
        let subset = Subset::classify(&sources, chosen_index);
        let inst = BenchmarkInstance {
            premise_id: None,
            premise: premise.into(),
            candidates,
            chosen_index,
            dimension,
            subset,
            trace: None,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        if self.candidates.len() != BENCHMARK_CANDIDATES {
            return Err(Error::Invalid(format!(
                "benchmark instance needs {BENCHMARK_CANDIDATES} candidates, got {}",
                self.candidates.len()
            )));
        }
        if self.chosen_index >= self.candidates.len() {
            return Err(Error::Invalid(format!("chosen index {} out of range", self.chosen_index)));
        }
        let ids: HashSet<&str> = self.candidates.iter().map(|c| c.id.as_str()).collect();
        if ids.len() != self.candidates.len() {
            return Err(Error::Invalid("benchmark candidates repeat an id".into()));
        }
        let sources: Vec<&Source> = self.candidates.iter().map(|c| &c.source).collect();
        let expected = Subset::classify(&sources, self.chosen_index);
        if expected != self.subset {
            return Err(Error::Invalid(format!(
                "subset `{}` contradicts candidate sources (expected `{}`)",
                self.subset.as_str(),
                expected.as_str()
            )));
        }
        Ok(())
    }

    pub fn chosen(&self) -> &BenchCandidate {
        &self.candidates[self.chosen_index]
    }
}

/// A reward model: maps `(premise, story)` to a real score.
pub trait RmAdapter: Send + Sync {
    fn name(&self) -> &str;
    fn score(&self, premise: &str, story_id: &str, text: &str) -> Result<f64>;
}

/// Seeded pseudo-random scores in [0, 1), keyed on `(seed, name, story id)`.
#[derive(Debug, Clone)]
pub struct MockAdapter {
    name: String,
    seed: u64,
}

impl MockAdapter {
    pub fn new(name: impl Into<String>, seed: u64) -> Self {
        MockAdapter {
            name: name.into(),
            seed,
        }
    }
}

impl RmAdapter for MockAdapter {
    fn name(&self) -> &str {
        &self.name
    }

    fn score(&self, _premise: &str, story_id: &str, _text: &str) -> Result<f64> {
        let h = hash64(&[&self.seed.to_string(), &self.name, story_id]);
        Ok((h >> 11) as f64 / (1u64 << 53) as f64)
    }
}

/// Fixed scores per story id; unknown ids are an error.
#[derive(Debug, Clone)]
pub struct ScriptedAdapter {
    name: String,
    scores: HashMap<String, f64>,
}

impl ScriptedAdapter {
    pub fn new(name: impl Into<String>, scores: HashMap<String, f64>) -> Self {
        ScriptedAdapter {
            name: name.into(),
            scores,
        }
    }

    pub fn from_pairs<'a>(name: impl Into<String>, pairs: impl IntoIterator<Item = (&'a str, f64)>) -> Self {
        Self::new(name, pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
    }
}

impl RmAdapter for ScriptedAdapter {
    fn name(&self) -> &str {
        &self.name
    }

    fn score(&self, _premise: &str, story_id: &str, _text: &str) -> Result<f64> {
        self.scores.get(story_id).copied().ok_or_else(|| Error::Adapter {
            adapter: self.name.clone(),
            message: format!("no scripted score for story `{story_id}`"),
        })
    }
}

/// `scale * f + offset` over another adapter.
pub struct AffineAdapter<A> {
    inner: A,
    scale: f64,
    offset: f64,
}

impl<A: RmAdapter> AffineAdapter<A> {
    pub fn new(inner: A, scale: f64, offset: f64) -> Self {
        AffineAdapter { inner, scale, offset }
    }
}

impl<A: RmAdapter> RmAdapter for AffineAdapter<A> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn score(&self, premise: &str, story_id: &str, text: &str) -> Result<f64> {
        Ok(self.scale * self.inner.score(premise, story_id, text)? + self.offset)
    }
}

/// One POST per `(premise, story)`; the endpoint answers `{"score": <f64>}`.
pub struct RemoteAdapter {
    name: String,
    endpoint: String,
    agent: ureq::Agent,
}

impl RemoteAdapter {
    pub fn new(name: impl Into<String>, endpoint: impl Into<String>, timeout: Duration) -> Self {
        RemoteAdapter {
            name: name.into(),
            endpoint: endpoint.into(),
            agent: ureq::Agent::config_builder()
                .timeout_global(Some(timeout))
                .build()
                .into(),
        }
    }
}

#[derive(Deserialize)]
struct RemoteScore {
    score: f64,
}

impl RmAdapter for RemoteAdapter {
    fn name(&self) -> &str {
        &self.name
    }

    fn score(&self, premise: &str, story_id: &str, text: &str) -> Result<f64> {
        let err = |message: String| Error::Adapter {
            adapter: self.name.clone(),
            message,
        };
        let body = serde_json::json!({"premise": premise, "story_id": story_id, "story": text});
        let mut resp = self
            .agent
            .post(&self.endpoint)
            .send_json(&body)
            .map_err(|e| err(format!("request failed: {e}")))?;
        let s: RemoteScore = resp
            .body_mut()
            .read_json()
            .map_err(|e| err(format!("bad response: {e}")))?;
        Ok(s.score)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AdapterConfig {
    Mock { name: String, seed: u64 },
    Scripted { name: String, scores: HashMap<String, f64> },
    Remote {
        name: String,
        endpoint: String,
        #[serde(default = "default_timeout")]
        timeout_secs: u64,
    },
}

fn default_timeout() -> u64 {
    60
}

impl AdapterConfig {
    pub fn name(&self) -> &str {
        match self {
            AdapterConfig::Mock { name, .. } | AdapterConfig::Scripted { name, .. } | AdapterConfig::Remote { name, .. } => name,
        }
    }

    pub fn build(&self) -> Box<dyn RmAdapter> {
        match self {
            AdapterConfig::Mock { name, seed } => Box::new(MockAdapter::new(name, *seed)),
            AdapterConfig::Scripted { name, scores } => Box::new(ScriptedAdapter::new(name, scores.clone())),
            AdapterConfig::Remote {
                name,
                endpoint,
                timeout_secs,
            } => Box::new(RemoteAdapter::new(name, endpoint, Duration::from_secs(*timeout_secs))),
        }
    }
}

fn checked_score(rm: &dyn RmAdapter, premise: &str, id: &str, text: &str) -> Result<f64> {
    let s = rm.score(premise, id, text)?;
    if !s.is_finite() {
        return Err(Error::NonFiniteScore {
            adapter: rm.name().to_string(),
            story: id.to_string(),
        });
    }
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    /// `None` when the top score is shared.
    pub predicted_index: Option<usize>,
    pub correct: bool,
}

/// Unique argmax over the candidates. A shared top score is never correct,
/// even if the chosen story is among the tied ones.
pub fn predict(rm: &dyn RmAdapter, instance: &BenchmarkInstance) -> Result<Prediction> {
    let scores = instance
        .candidates
        .iter()
        .map(|c| checked_score(rm, &instance.premise, &c.id, &c.text))
        .collect::<Result<Vec<f64>>>()?;
    let top = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut at_top = scores.iter().enumerate().filter(|(_, &s)| s == top).map(|(i, _)| i);
    let first = at_top.next();
    let predicted_index = if at_top.next().is_some() { None } else { first };
    Ok(Prediction {
        predicted_index,
        correct: predicted_index == Some(instance.chosen_index),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
}

impl Cell {
    fn add(&mut self, correct: bool) {
        self.total += 1;
        self.correct += usize::from(correct);
        self.accuracy = self.correct as f64 / self.total as f64;
    }
}

/// Accuracy overall and per populated dimension and subset. Cells with no
/// instances are absent rather than zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub overall: Cell,
    pub per_dimension: BTreeMap<Dimension, Cell>,
    pub per_subset: BTreeMap<Subset, Cell>,
}

const EMPTY: Cell = Cell {
    correct: 0,
    total: 0,
    accuracy: 0.0,
};

pub fn evaluate(rm: &dyn RmAdapter, benchmark: &[BenchmarkInstance]) -> Result<EvalReport> {
    if benchmark.is_empty() {
        return Err(Error::Invalid("cannot evaluate an empty benchmark".into()));
    }
    let predictions = benchmark
        .par_iter()
        .map(|inst| predict(rm, inst))
        .collect::<Result<Vec<_>>>()?;
    let mut report = EvalReport {
        overall: EMPTY,
        per_dimension: BTreeMap::new(),
        per_subset: BTreeMap::new(),
    };
    for (inst, p) in benchmark.iter().zip(&predictions) {
        report.overall.add(p.correct);
        report.per_dimension.entry(inst.dimension).or_insert(EMPTY).add(p.correct);
        report.per_subset.entry(inst.subset).or_insert(EMPTY).add(p.correct);
    }
    Ok(report)
}

impl EvalReport {
    /// Fixed-width console table.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<18} {:>8} {:>7} {:>9}", "cell", "correct", "total", "accuracy");
        let _ = writeln!(out, "{}", "-".repeat(45));
        let mut row = |name: &str, c: &Cell| {
            let _ = writeln!(out, "{:<18} {:>8} {:>7} {:>8.1}%", name, c.correct, c.total, 100.0 * c.accuracy);
        };
        row("overall", &self.overall);
        for d in Dimension::ALL {
            if let Some(c) = self.per_dimension.get(&d) {
                row(d.as_str(), c);
            }
        }
        for s in [Subset::LlmLlm, Subset::HumanLlm] {
            if let Some(c) = self.per_subset.get(&s) {
                row(s.as_str(), c);
            }
        }
        out
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_table())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BonSelection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub premise_id: Option<String>,
    pub adapter: String,
    pub story_id: String,
    pub score: f64,
}

/// Highest-scoring story; a shared top score goes to the smallest id.
pub fn bon_select<'a>(rm: &dyn RmAdapter, premise: &str, stories: &'a [StoryRecord]) -> Result<(&'a StoryRecord, f64)> {
    if stories.is_empty() {
        return Err(Error::Invalid("best-of-n needs at least one story".into()));
    }
    let mut best: Option<(&StoryRecord, f64)> = None;
    for s in stories {
        let v = checked_score(rm, premise, &s.id, s.text())?;
        best = match best {
            Some((b, bv)) if bv > v || (bv == v && b.id <= s.id) => Some((b, bv)),
            _ => Some((s, v)),
        };
    }
    Ok(best.expect("non-empty"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    AWins,
    BWins,
    Tie,
}

impl Verdict {
    pub fn swapped(self) -> Verdict {
        match self {
            Verdict::AWins => Verdict::BWins,
            Verdict::BWins => Verdict::AWins,
            Verdict::Tie => Verdict::Tie,
        }
    }
}

/// The selection ranked higher by humans wins; the same story is a tie.
pub fn head_to_head(sel_a: &str, sel_b: &str, human_ranking: &Ranking) -> Result<Verdict> {
    let rank = |s: &str| {
        human_ranking
            .rank_of(s)
            .ok_or_else(|| Error::Ranking(format!("selected story `{s}` is not in the human ranking")))
    };
    let (ra, rb) = (rank(sel_a)?, rank(sel_b)?);
    Ok(match ra.cmp(&rb) {
        std::cmp::Ordering::Equal => Verdict::Tie,
        std::cmp::Ordering::Less => Verdict::AWins,
        std::cmp::Ordering::Greater => Verdict::BWins,
    })
}

/// Human preference order over one premise's BoN pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BonRanking {
    pub premise_id: String,
    /// Story ids, best first.
    pub story_ids: Ranking,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadToHead {
    pub premise_id: String,
    pub rm_a: String,
    pub rm_b: String,
    pub selected_a: String,
    pub selected_b: String,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadToHeadSummary {
    pub a_wins: usize,
    pub b_wins: usize,
    pub ties: usize,
}

impl HeadToHeadSummary {
    pub fn total(&self) -> usize {
        self.a_wins + self.b_wins + self.ties
    }

    pub fn add(&mut self, v: Verdict) {
        match v {
            Verdict::AWins => self.a_wins += 1,
            Verdict::BWins => self.b_wins += 1,
            Verdict::Tie => self.ties += 1,
        }
    }
}

/// Pairs selections by premise id and judges each against its ranking.
pub fn head_to_head_all(
    a: &[BonSelection],
    b: &[BonSelection],
    rankings: &[BonRanking],
) -> Result<(Vec<HeadToHead>, HeadToHeadSummary)> {
    let by_premise = |sels: &[BonSelection]| -> Result<HashMap<String, BonSelection>> {
        sels.iter()
            .map(|s| {
                s.premise_id
                    .clone()
                    .map(|p| (p, s.clone()))
                    .ok_or_else(|| Error::Invalid(format!("selection `{}` has no premise id", s.story_id)))
            })
            .collect()
    };
    let (ma, mb) = (by_premise(a)?, by_premise(b)?);
    let mut results = Vec::new();
    let mut summary = HeadToHeadSummary::default();
    for r in rankings {
        let (Some(sa), Some(sb)) = (ma.get(&r.premise_id), mb.get(&r.premise_id)) else {
            return Err(Error::Invalid(format!("premise `{}` lacks a selection from both models", r.premise_id)));
        };
        let verdict = head_to_head(&sa.story_id, &sb.story_id, &r.story_ids)?;
        summary.add(verdict);
        results.push(HeadToHead {
            premise_id: r.premise_id.clone(),
            rm_a: sa.adapter.clone(),
            rm_b: sb.adapter.clone(),
            selected_a: sa.story_id.clone(),
            selected_b: sb.story_id.clone(),
            verdict,
        });
    }
    Ok((results, summary))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Language;
    use proptest::prelude::*;

    fn cands(prefix: &str, human_first: bool) -> Vec<BenchCandidate> {
        (0..4)
            .map(|i| BenchCandidate {
                id: format!("{prefix}{i}"),
                text: format!("story {i}"),
                source: if human_first && i == 0 { Source::Human } else { Source::model(format!("m{i}")) },
            })
            .collect()
    }

    fn inst(prefix: &str, chosen: usize, dim: Dimension) -> BenchmarkInstance {
        BenchmarkInstance::new("p", cands(prefix, false), chosen, dim).unwrap()
    }

    fn scripted(prefix: &str, scores: [f64; 4]) -> ScriptedAdapter {
        ScriptedAdapter::new(
            "rm",
            scores.iter().enumerate().map(|(i, &s)| (format!("{prefix}{i}"), s)).collect(),
        )
    }

    #[test]
    fn predict_examples() {
        let i = inst("a", 1, Dimension::Fluency);
        assert!(predict(&scripted("a", [1.0, 9.0, 2.0, 3.0]), &i).unwrap().correct);
        let i0 = inst("a", 0, Dimension::Fluency);
        let tie = predict(&scripted("a", [9.0, 9.0, 2.0, 3.0]), &i0).unwrap();
        assert_eq!(tie, Prediction { predicted_index: None, correct: false });
        assert!(!predict(&scripted("a", [1.0, 2.0, 3.0, 9.0]), &i0).unwrap().correct);
        assert!(matches!(
            predict(&scripted("a", [1.0, f64::NAN, 3.0, 9.0]), &i0),
            Err(Error::NonFiniteScore { .. })
        ));
    }

    #[test]
    fn evaluate_counts() {
        let bench: Vec<_> = (0..4).map(|k| inst(&format!("s{k}"), 0, Dimension::Fluency)).collect();
        let mut scores = HashMap::new();
        for k in 0..4 {
            for i in 0..4 {
                let good = k < 3 && i == 0;
                scores.insert(format!("s{k}{i}"), if good { 5.0 } else { i as f64 });
            }
        }
        let r = evaluate(&ScriptedAdapter::new("rm", scores), &bench).unwrap();
        assert_eq!(r.overall.accuracy, 0.75);
        assert_eq!(r.per_dimension.len(), 1);
        assert_eq!(r.per_dimension[&Dimension::Fluency].total, 4);
        assert!(!r.per_subset.contains_key(&Subset::HumanLlm));
        assert!(evaluate(&MockAdapter::new("m", 1), &[]).is_err());
        assert!(r.to_table().contains("fluency"));
    }

    #[test]
    fn subset_derivation_and_validation() {
        let h = BenchmarkInstance::new("p", cands("h", true), 0, Dimension::Coherence).unwrap();
        assert_eq!(h.subset, Subset::HumanLlm);
        let h1 = BenchmarkInstance::new("p", cands("h", true), 1, Dimension::Coherence).unwrap();
        assert_eq!(h1.subset, Subset::LlmLlm);
        let mut json = serde_json::to_value(&h).unwrap();
        json["subset"] = "llm_llm".into();
        assert!(serde_json::from_value::<BenchmarkInstance>(json).is_err());
        assert!(BenchmarkInstance::new("p", cands("x", false)[..3].to_vec(), 0, Dimension::Coherence).is_err());
    }

    fn story(id: &str) -> StoryRecord {
        StoryRecord::new(id, "t", Source::model("g"), Language::En)
    }

    #[test]
    fn bon_examples() {
        let two = vec![story("x"), story("y")];
        let rm = ScriptedAdapter::from_pairs("rm", [("x", 3.0), ("y", 5.0)]);
        assert_eq!(bon_select(&rm, "p", &two).unwrap().0.id, "y");
        let sixteen: Vec<_> = (0..16).map(|i| story(&format!("s{i:02}"))).rev().collect();
        let flat = ScriptedAdapter::new("flat", sixteen.iter().map(|s| (s.id.clone(), 1.0)).collect());
        assert_eq!(bon_select(&flat, "p", &sixteen).unwrap().0.id, "s00");
        let m = MockAdapter::new("m", 42);
        assert_eq!(bon_select(&m, "p", &sixteen).unwrap().0.id, bon_select(&m, "p", &sixteen).unwrap().0.id);
        assert_eq!(bon_select(&flat, "p", &sixteen[..1]).unwrap().0.id, "s15");
        assert!(bon_select(&flat, "p", &[]).is_err());
    }

    #[test]
    fn head_to_head_examples() {
        let ranking = Ranking::from_order((1..=6).map(|i| format!("r{i}")).collect()).unwrap();
        assert_eq!(head_to_head("r3", "r5", &ranking).unwrap(), Verdict::AWins);
        assert_eq!(head_to_head("r4", "r4", &ranking).unwrap(), Verdict::Tie);
        assert_eq!(head_to_head("r1", "r2", &ranking).unwrap(), Verdict::AWins);
        assert_eq!(head_to_head("r6", "r2", &ranking).unwrap(), Verdict::BWins);
        assert!(head_to_head("zz", "r2", &ranking).is_err());
    }

    proptest! {
        #[test]
        fn affine_invariance(raw in prop::collection::vec(prop::array::uniform4(0u8..6), 1..12), chosen in prop::collection::vec(0usize..4, 12), a in 0.1f64..10.0, b in -5.0f64..5.0) {
            let bench: Vec<_> = raw.iter().enumerate().map(|(k, _)| inst(&format!("i{k}_"), chosen[k], Dimension::ALL[k % 5])).collect();
            let scores: HashMap<String, f64> = raw.iter().enumerate().flat_map(|(k, row)| {
                row.iter().enumerate().map(move |(i, &v)| (format!("i{k}_{i}"), v as f64))
            }).collect();
            let base = ScriptedAdapter::new("rm", scores.clone());
            // Integer-valued scores stay exactly ordered (and exactly tied) under the map.
            let moved = AffineAdapter::new(ScriptedAdapter::new("rm", scores), a, b);
            prop_assert_eq!(evaluate(&base, &bench).unwrap(), evaluate(&moved, &bench).unwrap());
        }

        #[test]
        fn head_to_head_antisymmetric(a in 0usize..8, b in 0usize..8) {
            let ranking = Ranking::from_order((0..8).map(|i| format!("s{i}")).collect()).unwrap();
            let (x, y) = (format!("s{a}"), format!("s{b}"));
            let v = head_to_head(&x, &y, &ranking).unwrap();
            prop_assert_eq!(head_to_head(&y, &x, &ranking).unwrap(), v.swapped());
            prop_assert_eq!(v == Verdict::Tie, a == b);
        }

        #[test]
        fn cell_counts_sum(raw in prop::collection::vec((0usize..4, 0usize..5, any::<bool>()), 1..30)) {
            let bench: Vec<_> = raw.iter().enumerate().map(|(k, &(c, d, h))| {
                BenchmarkInstance::new("p", cands(&format!("k{k}_"), h), c, Dimension::ALL[d]).unwrap()
            }).collect();
            let r = evaluate(&MockAdapter::new("m", 3), &bench).unwrap();
            prop_assert_eq!(r.per_dimension.values().map(|c| c.correct).sum::<usize>(), r.overall.correct);
            prop_assert_eq!(r.per_subset.values().map(|c| c.correct).sum::<usize>(), r.overall.correct);
            prop_assert_eq!(r.per_dimension.values().map(|c| c.total).sum::<usize>(), bench.len());
        }
    }
}
