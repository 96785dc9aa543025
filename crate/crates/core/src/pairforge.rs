//! Training preference pairs: back-generation from upvotes, constrained
//! rewrites, guided versus unguided continuation and LLM-judged pairs.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::corpus::{count_words, word_boundary, Corpus, Language, Premise, Source, StoryRecord};
use crate::digest::{hash64, sha256_hex};
use crate::error::{Error, Result};
use crate::jsonl::{read_records, write_records, Provenance};
use crate::judgekit::{generate_story, prompts, score_story, Judge, RequestKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    BackGeneration,
    Rewriting,
    Continuation,
    LlmVsLlm,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::BackGeneration, Method::Rewriting, Method::Continuation, Method::LlmVsLlm];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::BackGeneration => "back_generation",
            Method::Rewriting => "rewriting",
            Method::Continuation => "continuation",
            Method::LlmVsLlm => "llm_vs_llm",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s || m.as_str().replace('_', "-") == s)
            .ok_or_else(|| Error::Invalid(format!("unknown pair method `{s}`")))
    }
}

pub type Audit = BTreeMap<String, Value>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferencePair {
    pub premise: String,
    pub chosen: StoryRecord,
    pub rejected: StoryRecord,
    pub method: Method,
    pub provenance: Audit,
}

impl PreferencePair {
    pub fn new(premise: impl Into<String>, chosen: StoryRecord, rejected: StoryRecord, method: Method, mut provenance: Audit) -> Result<Self> {
        let premise = premise.into();
        if premise.trim().is_empty() {
            return Err(Error::Invalid("preference pair needs a premise".into()));
        }
        if chosen.id == rejected.id {
            return Err(Error::Invalid(format!("pair chooses and rejects the same story `{}`", chosen.id)));
        }
        provenance.insert("chosen_id".into(), json!(chosen.id));
        provenance.insert("rejected_id".into(), json!(rejected.id));
        Ok(PreferencePair {
            premise,
            chosen,
            rejected,
            method,
            provenance,
        })
    }

    fn sort_key(&self) -> (String, &str, &str) {
        (sha256_hex(self.premise.as_bytes()), &self.chosen.id, &self.rejected.id)
    }
}

/// One line of a training-pair file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingRecord {
    pub premise: String,
    pub chosen_text: String,
    pub rejected_text: String,
    pub method: Method,
    pub provenance: Audit,
}

impl From<&PreferencePair> for TrainingRecord {
    fn from(p: &PreferencePair) -> Self {
        TrainingRecord {
            premise: p.premise.clone(),
            chosen_text: p.chosen.text().to_string(),
            rejected_text: p.rejected.text().to_string(),
            method: p.method,
            provenance: p.provenance.clone(),
        }
    }
}

/// An input that produced no pair, with the reason.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Skip {
    pub subject: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ForgeOutcome {
    /// Sorted by premise hash, then chosen and rejected id.
    pub pairs: Vec<PreferencePair>,
    pub skipped: Vec<Skip>,
}

impl ForgeOutcome {
    fn collect(results: Vec<std::result::Result<PreferencePair, Skip>>) -> Self {
        let mut out = ForgeOutcome::default();
        for r in results {
            match r {
                Ok(p) => out.pairs.push(p),
                Err(s) => {
                    log::debug!("skipped {}: {}", s.subject, s.reason);
                    out.skipped.push(s);
                }
            }
        }
        out.pairs.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        out
    }
}

fn skip(subject: impl Into<String>, reason: impl std::fmt::Display) -> Skip {
    Skip {
        subject: subject.into(),
        reason: reason.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", content = "label", rename_all = "snake_case")]
pub enum ClusterKey {
    Genre(String),
    AuthorColumn(String),
}

impl std::fmt::Display for ClusterKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ClusterKey::Genre(l) => write!(f, "genre:{l}"),
            ClusterKey::AuthorColumn(l) => write!(f, "author_column:{l}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoryCluster {
    pub key: ClusterKey,
    /// Story ids in corpus order.
    pub members: Vec<String>,
}

impl StoryCluster {
    pub fn is_pairable(&self) -> bool {
        self.members.len() >= 2
    }
}

/// One cluster per distinct genre and per distinct author column, ordered
/// by key. Stories with neither field are left out.
pub fn cluster_stories(corpus: &Corpus) -> Vec<StoryCluster> {
    let mut groups: BTreeMap<ClusterKey, Vec<String>> = BTreeMap::new();
    for s in corpus.records() {
        if let Some(c) = &s.category {
            groups.entry(ClusterKey::Genre(c.clone())).or_default().push(s.id.clone());
        }
        if let Some(a) = &s.author_column {
            groups.entry(ClusterKey::AuthorColumn(a.clone())).or_default().push(s.id.clone());
        }
    }
    groups
        .into_iter()
        .map(|(key, members)| StoryCluster { key, members })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackgenConfig {
    pub min_upvotes: u64,
    pub min_gap_ratio: f64,
    pub max_pairs_per_cluster: usize,
    /// Words of each story shown to the premise writer.
    pub abstract_words: usize,
}

impl Default for BackgenConfig {
    fn default() -> Self {
        BackgenConfig {
            min_upvotes: 10,
            min_gap_ratio: 1.5,
            max_pairs_per_cluster: 50,
            abstract_words: 200,
        }
    }
}

impl BackgenConfig {
    /// Both sides reach `min_upvotes` and the larger count is at least
    /// `min_gap_ratio` times the smaller.
    pub fn passes(&self, a: u64, b: u64) -> bool {
        let (lo, hi) = (a.min(b), a.max(b));
        lo >= self.min_upvotes && lo > 0 && hi as f64 >= self.min_gap_ratio * lo as f64
    }
}

struct Candidate<'a> {
    cluster: &'a ClusterKey,
    hi: &'a StoryRecord,
    lo: &'a StoryRecord,
}

/// Samples engagement-filtered pairs within each cluster, asks `backend`
/// for a shared premise and picks the more-upvoted story as chosen. A pair
/// reached through two clusters is built once.
pub fn build_backgen_pairs(
    clusters: &[StoryCluster],
    corpus: &Corpus,
    backend: &Judge,
    cfg: &BackgenConfig,
    seed: u64,
) -> Result<ForgeOutcome> {
    let mut seen = HashSet::new();
    let mut picked = Vec::new();
    let mut early_skips = Vec::new();
    for cluster in clusters.iter().filter(|c| c.is_pairable()) {
        let members = cluster
            .members
            .iter()
            .map(|id| {
                corpus
                    .get(id)
                    .ok_or_else(|| Error::Invalid(format!("cluster {} names unknown story `{id}`", cluster.key)))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut eligible = Vec::new();
        for (i, a) in members.iter().enumerate() {
            for b in &members[i + 1..] {
                let (Some(ua), Some(ub)) = (a.upvotes(), b.upvotes()) else {
                    continue;
                };
                if ua == ub {
                    if ua >= cfg.min_upvotes {
                        early_skips.push(Err(skip(format!("{}|{}", a.id, b.id), "equal upvotes")));
                    }
                    continue;
                }
                if !cfg.passes(ua, ub) {
                    continue;
                }
                let (hi, lo) = if ua > ub { (*a, *b) } else { (*b, *a) };
                eligible.push(Candidate {
                    cluster: &cluster.key,
                    hi,
                    lo,
                });
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(hash64(&[&seed.to_string(), "backgen", &cluster.key.to_string()]));
        eligible.shuffle(&mut rng);
        let mut taken = 0;
        for c in eligible {
            if taken == cfg.max_pairs_per_cluster {
                break;
            }
            let key = if c.hi.id < c.lo.id {
                (c.hi.id.clone(), c.lo.id.clone())
            } else {
                (c.lo.id.clone(), c.hi.id.clone())
            };
            if seen.insert(key) {
                picked.push(c);
                taken += 1;
            }
        }
    }

    let mut results: Vec<_> = picked
        .par_iter()
        .map(|c| {
            let subject = format!("{}|{}", c.hi.id, c.lo.id);
            let prompt = prompts::render(
                prompts::BACKGEN_TEMPLATE,
                &[
                    ("title_a", c.hi.display_title()),
                    ("abstract_a", c.hi.excerpt(cfg.abstract_words)),
                    ("title_b", c.lo.display_title()),
                    ("abstract_b", c.lo.excerpt(cfg.abstract_words)),
                ],
            )
            .map_err(|e| skip(&subject, e))?;
            let premise = backend
                .complete_text(RequestKind::Premise, prompt)
                .map_err(|e| skip(&subject, e))?;
            let audit = Audit::from([
                ("backend".into(), json!(backend.id())),
                ("cluster".into(), json!(c.cluster.to_string())),
                ("chosen_upvotes".into(), json!(c.hi.upvotes())),
                ("rejected_upvotes".into(), json!(c.lo.upvotes())),
                ("min_upvotes".into(), json!(cfg.min_upvotes)),
                ("min_gap_ratio".into(), json!(cfg.min_gap_ratio)),
            ]);
            PreferencePair::new(premise.trim(), c.hi.clone(), c.lo.clone(), Method::BackGeneration, audit)
                .map_err(|e| skip(&subject, e))
        })
        .collect();
    results.extend(early_skips);
    Ok(ForgeOutcome::collect(results))
}

/// `2 * LCS / (len_a + len_b)` over whitespace tokens; 1 for two empty texts.
pub fn lcs_ratio(a: &str, b: &str) -> f64 {
    let xa: Vec<&str> = a.split_whitespace().collect();
    let xb: Vec<&str> = b.split_whitespace().collect();
    if xa.is_empty() && xb.is_empty() {
        return 1.0;
    }
    let mut prev = vec![0u32; xb.len() + 1];
    let mut cur = vec![0u32; xb.len() + 1];
    for wa in &xa {
        for (j, wb) in xb.iter().enumerate() {
            cur[j + 1] = if wa == wb { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    2.0 * prev[xb.len()] as f64 / (xa.len() + xb.len()) as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewriteConfig {
    /// Templates drawn from uniformly; empty means every shipped rewrite template.
    pub templates: Vec<String>,
    pub similarity_ceiling: f64,
}

impl Default for RewriteConfig {
    fn default() -> Self {
        RewriteConfig {
            templates: Vec::new(),
            similarity_ceiling: 0.98,
        }
    }
}

/// Human original as chosen, a constrained rewrite as rejected. Stories
/// without a known premise are skipped; near-verbatim rewrites are discarded.
pub fn build_rewrite_pairs(
    corpus: &Corpus,
    premises: &[Premise],
    backend: &Judge,
    cfg: &RewriteConfig,
    seed: u64,
) -> Result<ForgeOutcome> {
    let templates: Vec<String> = if cfg.templates.is_empty() {
        prompts::rewrite_template_ids().into_iter().map(String::from).collect()
    } else {
        cfg.templates.clone()
    };
    for t in &templates {
        prompts::template(t)?;
    }
    let by_id: HashMap<&str, &str> = premises.iter().map(|p| (p.id.as_str(), p.text.as_str())).collect();
    let stories: Vec<&StoryRecord> = corpus.records().iter().filter(|s| s.source.is_human()).collect();
    let results = stories
        .par_iter()
        .map(|s| {
            let premise = s
                .premise_id
                .as_deref()
                .and_then(|p| by_id.get(p))
                .ok_or_else(|| skip(&s.id, "no premise for story"))?;
            let pick = hash64(&[&seed.to_string(), "rewrite", &s.id]) as usize % templates.len();
            let template = &templates[pick];
            let prompt = prompts::render(
                template,
                &[("title", s.display_title()), ("abstract", premise), ("content", s.text())],
            )
            .map_err(|e| skip(&s.id, e))?;
            let text = backend
                .complete_text(RequestKind::Rewrite, prompt)
                .map_err(|e| skip(&s.id, e))?;
            let ratio = lcs_ratio(s.text(), &text);
            if ratio >= cfg.similarity_ceiling {
                return Err(skip(&s.id, format!("rewrite too similar to original (ratio {ratio:.4})")));
            }
            let rejected = StoryRecord::new(
                format!("{}::rewrite::{template}", s.id),
                text,
                Source::Model(backend.id().to_string()),
                s.language(),
            );
            let audit = Audit::from([
                ("backend".into(), json!(backend.id())),
                ("template_id".into(), json!(template)),
                ("lcs_ratio".into(), json!(ratio)),
                ("similarity_ceiling".into(), json!(cfg.similarity_ceiling)),
            ]);
            PreferencePair::new(*premise, (*s).clone(), rejected, Method::Rewriting, audit).map_err(|e| skip(&s.id, e))
        })
        .collect();
    Ok(ForgeOutcome::collect(results))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContinuationConfig {
    pub split_fraction: f64,
    /// Both the premise part and the human continuation must reach this.
    pub min_words: usize,
    pub guided_template: String,
    pub unguided_template: String,
}

impl Default for ContinuationConfig {
    fn default() -> Self {
        ContinuationConfig {
            split_fraction: 0.3,
            min_words: 100,
            guided_template: prompts::GUIDED_TEMPLATE.into(),
            unguided_template: prompts::UNGUIDED_PREMISE_TEMPLATE.into(),
        }
    }
}

/// Splits a story after `round(fraction * words)` words, both halves trimmed.
pub fn split_story(text: &str, language: Language, fraction: f64) -> (&str, &str) {
    let k = (fraction * count_words(text, language) as f64).round() as usize;
    let at = word_boundary(text, language, k);
    (text[..at].trim(), text[at..].trim())
}

/// The first part of each story is the premise. The chosen story is
/// written with the human continuation in the prompt, the rejected one from
/// the premise alone, both by `backend`.
pub fn build_continuation_pairs(corpus: &Corpus, backend: &Judge, cfg: &ContinuationConfig) -> Result<ForgeOutcome> {
    if !(cfg.split_fraction > 0.0 && cfg.split_fraction < 1.0) {
        return Err(Error::Invalid(format!("split fraction {} must lie in (0, 1)", cfg.split_fraction)));
    }
    for t in [&cfg.guided_template, &cfg.unguided_template] {
        prompts::template(t)?;
    }
    let results = corpus
        .records()
        .par_iter()
        .map(|s| {
            let (head, rest) = split_story(s.text(), s.language(), cfg.split_fraction);
            let (hw, rw) = (count_words(head, s.language()), count_words(rest, s.language()));
            if hw < cfg.min_words || rw < cfg.min_words {
                return Err(skip(&s.id, format!("split parts of {hw} and {rw} words fall under {}", cfg.min_words)));
            }
            let arm = |template: &str| -> Result<String> {
                let vars: &[(&str, &str)] = &[("title", head), ("beginning", rest), ("premise", head)];
                let wanted = prompts::placeholders(template)?;
                let vars: Vec<(&str, &str)> = vars.iter().copied().filter(|(k, _)| wanted.iter().any(|w| w == k)).collect();
                backend.complete_text(RequestKind::Continuation, prompts::render(template, &vars)?)
            };
            let guided = arm(&cfg.guided_template).map_err(|e| skip(&s.id, format!("guided arm: {e}")))?;
            let unguided = arm(&cfg.unguided_template).map_err(|e| skip(&s.id, format!("unguided arm: {e}")))?;
            let model = Source::Model(backend.id().to_string());
            let chosen = StoryRecord::new(format!("{}::continuation::guided", s.id), guided, model.clone(), s.language());
            let rejected = StoryRecord::new(format!("{}::continuation::unguided", s.id), unguided, model, s.language());
            let audit = Audit::from([
                ("backend".into(), json!(backend.id())),
                ("source_story".into(), json!(s.id)),
                ("split_fraction".into(), json!(cfg.split_fraction)),
                ("guided_template".into(), json!(cfg.guided_template)),
                ("unguided_template".into(), json!(cfg.unguided_template)),
            ]);
            PreferencePair::new(head, chosen, rejected, Method::Continuation, audit).map_err(|e| skip(&s.id, e))
        })
        .collect();
    Ok(ForgeOutcome::collect(results))
}

/// Two generators write a story per premise; the judge's higher overall
/// wins and an exact tie is skipped.
pub fn build_llm_pairs(
    premises: &[Premise],
    generator_a: &Judge,
    generator_b: &Judge,
    judge: &Judge,
    template_id: &str,
    target_words: usize,
) -> Result<ForgeOutcome> {
    if generator_a.id() == generator_b.id() {
        return Err(Error::Invalid(format!("both generators are `{}`", generator_a.id())));
    }
    prompts::template(template_id)?;
    let results = premises
        .par_iter()
        .map(|p| {
            let fail = |e: Error| skip(&p.id, e);
            let a = generate_story(generator_a, p, template_id, target_words).map_err(fail)?;
            let b = generate_story(generator_b, p, template_id, target_words).map_err(fail)?;
            let sa = score_story(judge, &p.text, &a).map_err(fail)?.overall;
            let sb = score_story(judge, &p.text, &b).map_err(fail)?.overall;
            if sa == sb {
                return Err(skip(&p.id, format!("judge tie at overall {sa}")));
            }
            let audit = Audit::from([
                ("judge".into(), json!(judge.id())),
                ("generator_a".into(), json!(generator_a.id())),
                ("generator_b".into(), json!(generator_b.id())),
                ("overall_a".into(), json!(sa)),
                ("overall_b".into(), json!(sb)),
            ]);
            let (chosen, rejected) = if sa > sb { (a, b) } else { (b, a) };
            PreferencePair::new(&p.text, chosen, rejected, Method::LlmVsLlm, audit).map_err(fail)
        })
        .collect();
    Ok(ForgeOutcome::collect(results))
}

pub fn export_training_pairs(pairs: &[PreferencePair], path: &Path, header: Option<Provenance>) -> Result<usize> {
    let records: Vec<TrainingRecord> = pairs.iter().map(TrainingRecord::from).collect();
    write_records(path, header, &records)
}

pub fn read_training_pairs(path: &Path) -> Result<Vec<TrainingRecord>> {
    Ok(read_records(path)?.into_records())
}

/// Pair counts per method, present methods only.
/// Merges pair lists into the canonical export order.
pub fn canonical_order(mut pairs: Vec<PreferencePair>) -> Vec<PreferencePair> {
    pairs.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    pairs
}

pub fn method_counts(records: &[TrainingRecord]) -> BTreeMap<Method, usize> {
    let mut counts = BTreeMap::new();
    for r in records {
        *counts.entry(r.method).or_insert(0) += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::judgekit::{BackendError, EchoBackend, RetryPolicy, ScriptedBackend};
    use proptest::prelude::*;
    use std::sync::Arc;

    fn words(n: usize, tag: &str) -> String {
        (0..n).map(|i| format!("{tag}{i}")).collect::<Vec<_>>().join(" ")
    }

    fn human(id: &str, upvotes: Option<u64>, category: Option<&str>) -> StoryRecord {
        let mut s = StoryRecord::human(id, words(60, id));
        if let Some(c) = category {
            s = s.with_category(c);
        }
        if let Some(u) = upvotes {
            s = s.with_upvotes(u).unwrap();
        }
        s
    }

    #[test]
    fn clustering_examples() {
        let corpus = Corpus::new(
            "c",
            vec![
                human("a", None, Some("x")),
                human("b", None, Some("x")),
                human("c", None, Some("y")).with_author_column("col-7"),
                human("d", None, None).with_author_column("col-7"),
                human("e", None, None),
            ],
        )
        .unwrap();
        let clusters = cluster_stories(&corpus);
        assert_eq!(clusters.len(), 3);
        let find = |k: ClusterKey| clusters.iter().find(|c| c.key == k).unwrap().clone();
        assert!(find(ClusterKey::Genre("x".into())).is_pairable());
        assert!(!find(ClusterKey::Genre("y".into())).is_pairable());
        assert_eq!(find(ClusterKey::AuthorColumn("col-7".into())).members, vec!["c", "d"]);
        assert!(clusters.iter().all(|c| !c.members.contains(&"e".to_string())));
    }

    fn backgen(upvotes: &[u64]) -> ForgeOutcome {
        let stories = upvotes
            .iter()
            .enumerate()
            .map(|(i, &u)| human(&format!("s{i}"), Some(u), Some("g")))
            .collect();
        let corpus = Corpus::new("c", stories).unwrap();
        build_backgen_pairs(&cluster_stories(&corpus), &corpus, &Judge::mock("m", 1), &BackgenConfig::default(), 7).unwrap()
    }

    #[test]
    fn backgen_examples() {
        let out = backgen(&[500, 20]);
        assert_eq!(out.pairs.len(), 1);
        assert_eq!(out.pairs[0].chosen.id, "s0");
        assert_eq!(out.pairs[0].method, Method::BackGeneration);
        assert!(!out.pairs[0].premise.is_empty());
        assert!(backgen(&[5, 3]).pairs.is_empty());
        let tie = backgen(&[50, 50]);
        assert!(tie.pairs.is_empty());
        assert_eq!(tie.skipped.len(), 1);
        assert!(backgen(&[20, 25]).pairs.is_empty());
    }

    #[test]
    fn backgen_dedupes_and_caps() {
        let stories = (0..6)
            .map(|i| human(&format!("s{i}"), Some(10 * 2u64.pow(i)), Some("g")).with_author_column("col"))
            .collect();
        let corpus = Corpus::new("c", stories).unwrap();
        let clusters = cluster_stories(&corpus);
        let judge = Judge::mock("m", 1);
        let all = build_backgen_pairs(&clusters, &corpus, &judge, &BackgenConfig::default(), 1).unwrap();
        assert_eq!(all.pairs.len(), 15);
        let capped = BackgenConfig {
            max_pairs_per_cluster: 4,
            ..Default::default()
        };
        let some = build_backgen_pairs(&clusters, &corpus, &judge, &capped, 1).unwrap();
        assert!(some.pairs.len() <= 8 && some.pairs.len() >= 4);
        assert_eq!(some, build_backgen_pairs(&clusters, &corpus, &judge, &capped, 1).unwrap());
    }

    #[test]
    fn backgen_failure_skips_pair() {
        let corpus = Corpus::new("c", vec![human("a", Some(100), Some("g")), human("b", Some(20), Some("g"))]).unwrap();
        let judge = Judge::new("bad", Arc::new(ScriptedBackend::failing("down"))).with_retry(RetryPolicy::immediate(2));
        let out = build_backgen_pairs(&cluster_stories(&corpus), &corpus, &judge, &BackgenConfig::default(), 1).unwrap();
        assert!(out.pairs.is_empty());
        assert_eq!(out.skipped.len(), 1);
    }

    fn with_premise(id: &str, n: usize) -> (StoryRecord, Premise) {
        (
            StoryRecord::human(id, words(n, id)).with_premise_id(format!("p-{id}")),
            Premise::new(format!("p-{id}"), format!("A premise for {id}.")),
        )
    }

    #[test]
    fn rewrite_examples() {
        let (s, p) = with_premise("a", 80);
        let corpus = Corpus::new("c", vec![s.clone(), StoryRecord::human("orphan", "no premise here")]).unwrap();
        let cfg = RewriteConfig {
            templates: vec!["rewrite.ending_motivation".into()],
            ..Default::default()
        };
        let out = build_rewrite_pairs(&corpus, std::slice::from_ref(&p), &Judge::mock("m", 3), &cfg, 1).unwrap();
        assert_eq!(out.pairs.len(), 1);
        let pair = &out.pairs[0];
        assert_eq!(pair.method, Method::Rewriting);
        assert_eq!(pair.chosen, s);
        assert_eq!(pair.provenance["template_id"], json!("rewrite.ending_motivation"));
        assert_eq!(out.skipped.len(), 1);

        let echo = Judge::new("echo", Arc::new(EchoBackend)).with_retry(RetryPolicy::immediate(1));
        let out = build_rewrite_pairs(&corpus, std::slice::from_ref(&p), &echo, &cfg, 1).unwrap();
        assert!(out.pairs.is_empty());
        assert!(out.skipped.iter().any(|s| s.reason.contains("too similar")));

        let empty = Judge::new("empty", Arc::new(ScriptedBackend::always(""))).with_retry(RetryPolicy::immediate(1));
        assert!(build_rewrite_pairs(&corpus, &[p], &empty, &cfg, 1).unwrap().pairs.is_empty());
    }

    #[test]
    fn lcs_ratio_examples() {
        assert_eq!(lcs_ratio("a b c", "a b c"), 1.0);
        assert_eq!(lcs_ratio("a b c d", "e f"), 0.0);
        assert!((lcs_ratio("a b c d", "a x c d") - 0.75).abs() < 1e-12);
        assert_eq!(lcs_ratio("", ""), 1.0);
    }

    #[test]
    fn continuation_examples() {
        let long = StoryRecord::human("long", words(1000, "w"));
        let short = StoryRecord::human("short", words(120, "w"));
        let corpus = Corpus::new("c", vec![long, short]).unwrap();
        let judge = Judge::mock("m", 5);
        let out = build_continuation_pairs(&corpus, &judge, &ContinuationConfig::default()).unwrap();
        assert_eq!(out.pairs.len(), 1);
        assert_eq!(count_words(&out.pairs[0].premise, Language::En), 300);
        assert!(out.pairs[0].chosen.id.ends_with("guided"));
        assert_eq!(out.skipped[0].subject, "short");
        assert_eq!(out, build_continuation_pairs(&corpus, &judge, &ContinuationConfig::default()).unwrap());

        let flaky = Judge::new(
            "flaky",
            Arc::new(ScriptedBackend::new(vec![Ok("fine".into()), Err(BackendError("down".into()))])),
        )
        .with_retry(RetryPolicy::immediate(1));
        let one = Corpus::new("c", vec![StoryRecord::human("long", words(1000, "w"))]).unwrap();
        assert!(build_continuation_pairs(&one, &flaky, &ContinuationConfig::default()).unwrap().pairs.is_empty());
    }

    #[test]
    fn llm_pair_examples() {
        let premises: Vec<_> = (0..5).map(|i| Premise::new(format!("p{i}"), format!("Premise number {i}."))).collect();
        let (a, b, j) = (Judge::mock("a", 1), Judge::mock("b", 2), Judge::mock("j", 3));
        let out = build_llm_pairs(&premises, &a, &b, &j, prompts::DEFAULT_STORY_TEMPLATE, 200).unwrap();
        assert_eq!(out.pairs.len() + out.skipped.len(), 5);
        for p in &out.pairs {
            assert!(p.provenance["overall_a"] != p.provenance["overall_b"]);
            let (sa, sb) = (p.provenance["overall_a"].as_f64().unwrap(), p.provenance["overall_b"].as_f64().unwrap());
            let winner = if sa > sb { "a" } else { "b" };
            assert!(p.chosen.id.ends_with(winner));
        }
        assert_eq!(out, build_llm_pairs(&premises, &a, &b, &j, prompts::DEFAULT_STORY_TEMPLATE, 200).unwrap());
        assert!(build_llm_pairs(&premises, &a, &a, &j, prompts::DEFAULT_STORY_TEMPLATE, 200).is_err());
    }

    #[test]
    fn llm_pair_tie_skipped() {
        let p = [Premise::new("p", "A premise.")];
        let reply = r#"{"creativity": 7, "coherence": 7, "fluency": 7, "characterization": 7, "relevance": 7, "overall": 7}"#;
        let judge = Judge::new("j", Arc::new(ScriptedBackend::always(reply)));
        let out = build_llm_pairs(&p, &Judge::mock("a", 1), &Judge::mock("b", 2), &judge, prompts::DEFAULT_STORY_TEMPLATE, 50).unwrap();
        assert!(out.pairs.is_empty());
        assert!(out.skipped[0].reason.contains("tie"));
    }

    #[test]
    fn export_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pairs.jsonl");
        assert_eq!(export_training_pairs(&[], &path, None).unwrap(), 0);
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "");
        let out = backgen(&[500, 20, 90]);
        assert_eq!(export_training_pairs(&out.pairs, &path, None).unwrap(), out.pairs.len());
        let back = read_training_pairs(&path).unwrap();
        assert_eq!(back, out.pairs.iter().map(TrainingRecord::from).collect::<Vec<_>>());
        assert_eq!(method_counts(&back)[&Method::BackGeneration], out.pairs.len());
        assert_eq!("back-generation".parse::<Method>().unwrap(), Method::BackGeneration);
    }

    proptest! {
        #[test]
        fn backgen_respects_filter(upvotes in prop::collection::vec(0u64..300, 2..9), min in 0u64..40, ratio in 1.0f64..3.0) {
            let stories = upvotes.iter().enumerate().map(|(i, &u)| human(&format!("s{i}"), Some(u), Some("g"))).collect();
            let corpus = Corpus::new("c", stories).unwrap();
            let cfg = BackgenConfig { min_upvotes: min, min_gap_ratio: ratio, ..Default::default() };
            let out = build_backgen_pairs(&cluster_stories(&corpus), &corpus, &Judge::mock("m", 1), &cfg, 3).unwrap();
            for p in &out.pairs {
                let (c, r) = (p.chosen.upvotes().unwrap(), p.rejected.upvotes().unwrap());
                prop_assert!(c > r);
                prop_assert!(r >= min);
                prop_assert!(c as f64 >= ratio * r as f64);
                prop_assert!(p.chosen.id != p.rejected.id);
            }
        }

        #[test]
        fn lcs_ratio_bounded_symmetric(a in "[ab ]{0,30}", b in "[ab ]{0,30}") {
            let r = lcs_ratio(&a, &b);
            prop_assert!((0.0..=1.0).contains(&r));
            prop_assert_eq!(r, lcs_ratio(&b, &a));
        }
    }
}
