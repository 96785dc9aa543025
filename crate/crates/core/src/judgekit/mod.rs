//! Story generation and five-dimension scoring over a panel of judges.

pub mod backend;
pub mod cache;
pub mod parse;
pub mod prompts;

use std::collections::HashSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use backend::{
    Backend, BackendConfig, BackendError, BackendKind, CompletionRequest, EchoBackend,
    HttpBackend, MockBackend, RequestKind, RetryPolicy, ScriptedBackend,
};
pub use cache::ResponseCache;

use crate::corpus::{Language, Premise, Source, StoryRecord};
use crate::dimension::DimensionScores;
use crate::error::{Error, Result};

/// A named backend with its retry policy and optional response cache.
#[derive(Clone)]
pub struct Judge {
    id: String,
    backend: Arc<dyn Backend>,
    retry: RetryPolicy,
    cache: Option<Arc<ResponseCache>>,
}

enum Failure {
    Transport(String),
    Unusable(String),
}

impl Judge {
    pub fn new(id: impl Into<String>, backend: Arc<dyn Backend>) -> Self {
        Judge {
            id: id.into(),
            backend,
            retry: RetryPolicy::default(),
            cache: None,
        }
    }

    pub fn mock(id: impl Into<String>, seed: u64) -> Self {
        let id = id.into();
        let backend = Arc::new(MockBackend::new(id.clone(), seed));
        Judge::new(id, backend).with_retry(RetryPolicy::immediate(3))
    }

    pub fn from_config(cfg: &BackendConfig, default_seed: u64, cache: Option<Arc<ResponseCache>>) -> Result<Self> {
        let backend: Arc<dyn Backend> = Arc::from(cfg.build_backend(default_seed)?);
        Ok(Judge {
            id: cfg.name.clone(),
            backend,
            retry: cfg.retry,
            cache,
        })
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_cache(mut self, cache: Arc<ResponseCache>) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    /// Sends `request` until `accept` takes the reply or attempts run out.
    ///
    /// Only accepted replies are cached, so a bad reply is never replayed.
    pub fn call<T>(&self, request: &CompletionRequest, accept: impl Fn(&str) -> Result<T, String>) -> Result<T> {
        let key = ResponseCache::key(&self.id, &request.prompt);
        if let Some(hit) = self.cache.as_ref().and_then(|c| c.get(&key)) {
            if let Ok(v) = accept(&hit) {
                return Ok(v);
            }
        }
        let attempts = self.retry.attempts.max(1);
        let mut failure = Failure::Transport("no attempt made".into());
        for attempt in 1..=attempts {
            std::thread::sleep(self.retry.delay_before(attempt));
            match self.backend.complete(request) {
                Ok(reply) => match accept(&reply) {
                    Ok(v) => {
                        if let Some(c) = &self.cache {
                            c.put(&key, &reply)?;
                        }
                        return Ok(v);
                    }
                    Err(why) => failure = Failure::Unusable(why),
                },
                Err(e) => failure = Failure::Transport(e.0),
            }
            log::debug!("judge {} attempt {attempt}/{attempts} failed", self.id);
        }
        Err(match failure {
            Failure::Transport(last_error) => Error::BackendFailure {
                backend: self.id.clone(),
                attempts,
                last_error,
            },
            Failure::Unusable(reason) => Error::InvalidResponse {
                backend: self.id.clone(),
                attempts,
                reason,
            },
        })
    }

    /// Free-text completion; empty or whitespace-only replies are retried.
    pub fn complete_text(&self, kind: RequestKind, prompt: String) -> Result<String> {
        self.call(&CompletionRequest::new(kind, prompt), |r| {
            let t = r.trim();
            if t.is_empty() {
                Err("empty response".into())
            } else {
                Ok(t.to_string())
            }
        })
    }
}

impl std::fmt::Debug for Judge {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Judge")
            .field("id", &self.id)
            .field("retry", &self.retry)
            .field("cached", &self.cache.is_some())
            .finish()
    }
}

/// Ordered, non-empty set of judges with unique ids. The order fixes the
/// row order of every score matrix.
#[derive(Debug, Clone)]
pub struct JudgePanel {
    judges: Vec<Judge>,
}

impl JudgePanel {
    pub fn new(judges: Vec<Judge>) -> Result<Self> {
        if judges.is_empty() {
            return Err(Error::Invalid("a judge panel needs at least one judge".into()));
        }
        let mut seen = HashSet::new();
        for j in &judges {
            if !seen.insert(j.id.as_str()) {
                return Err(Error::Invalid(format!("duplicate judge id `{}`", j.id)));
            }
        }
        Ok(JudgePanel { judges })
    }

    pub fn judges(&self) -> &[Judge] {
        &self.judges
    }

    pub fn len(&self) -> usize {
        self.judges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.judges.is_empty()
    }

    pub fn ids(&self) -> Vec<String> {
        self.judges.iter().map(|j| j.id.clone()).collect()
    }
}

/// A premise and the candidate stories written for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub id: String,
    pub premise: Premise,
    pub candidates: Vec<StoryRecord>,
}

impl CandidateSet {
    pub fn new(premise: Premise, candidates: Vec<StoryRecord>) -> Result<Self> {
        let mut seen = HashSet::new();
        for c in &candidates {
            if !seen.insert(c.id.as_str()) {
                return Err(Error::Invalid(format!(
                    "candidate set `{}` repeats story `{}`",
                    premise.id, c.id
                )));
            }
        }
        Ok(CandidateSet {
            id: premise.id.clone(),
            premise,
            candidates,
        })
    }

    pub fn ids(&self) -> Vec<String> {
        self.candidates.iter().map(|c| c.id.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeRow {
    pub judge: String,
    pub scores: Vec<DimensionScores>,
}

/// Scores from every judge for every candidate of one set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMatrix")]
pub struct ScoreMatrix {
    pub candidate_set_id: String,
    pub candidate_ids: Vec<String>,
    pub rows: Vec<JudgeRow>,
}

#[derive(Deserialize)]
struct RawMatrix {
    candidate_set_id: String,
    candidate_ids: Vec<String>,
    rows: Vec<JudgeRow>,
}

impl TryFrom<RawMatrix> for ScoreMatrix {
    type Error = Error;

    fn try_from(r: RawMatrix) -> Result<Self> {
        ScoreMatrix::new(r.candidate_set_id, r.candidate_ids, r.rows)
    }
}

impl ScoreMatrix {
    pub fn new(candidate_set_id: impl Into<String>, candidate_ids: Vec<String>, rows: Vec<JudgeRow>) -> Result<Self> {
        let candidate_set_id = candidate_set_id.into();
        if candidate_ids.len() < 2 {
            return Err(Error::Invalid(format!(
                "score matrix `{candidate_set_id}` needs at least 2 candidates"
            )));
        }
        if rows.is_empty() {
            return Err(Error::Invalid(format!("score matrix `{candidate_set_id}` has no judge rows")));
        }
        for row in &rows {
            if row.scores.len() != candidate_ids.len() {
                return Err(Error::Invalid(format!(
                    "judge `{}` scored {} of {} candidates in `{candidate_set_id}`",
                    row.judge,
                    row.scores.len(),
                    candidate_ids.len()
                )));
            }
        }
        Ok(ScoreMatrix {
            candidate_set_id,
            candidate_ids,
            rows,
        })
    }

    pub fn judge_count(&self) -> usize {
        self.rows.len()
    }

    pub fn candidate_count(&self) -> usize {
        self.candidate_ids.len()
    }

    pub fn position(&self, candidate_id: &str) -> Option<usize> {
        self.candidate_ids.iter().position(|c| c == candidate_id)
    }

    /// Per-candidate mean over judges, for all six scores.
    pub fn mean_scores(&self) -> Vec<DimensionScores> {
        (0..self.candidate_count())
            .map(|c| {
                let col: Vec<DimensionScores> = self.rows.iter().map(|r| r.scores[c]).collect();
                DimensionScores::mean(&col).expect("matrix has at least one row")
            })
            .collect()
    }

    /// The matrix restricted to the given candidates, in the given order.
    pub fn restrict(&self, candidate_ids: &[String]) -> Result<ScoreMatrix> {
        let idx = candidate_ids
            .iter()
            .map(|id| {
                self.position(id)
                    .ok_or_else(|| Error::Invalid(format!("candidate `{id}` not in matrix")))
            })
            .collect::<Result<Vec<_>>>()?;
        ScoreMatrix::new(
            self.candidate_set_id.clone(),
            candidate_ids.to_vec(),
            self.rows
                .iter()
                .map(|r| JudgeRow {
                    judge: r.judge.clone(),
                    scores: idx.iter().map(|&i| r.scores[i]).collect(),
                })
                .collect(),
        )
    }
}

/// Writes one story for `premise` with the given template. The story id is
/// `<premise id>::<backend id>`.
pub fn generate_story(judge: &Judge, premise: &Premise, template_id: &str, target_words: usize) -> Result<StoryRecord> {
    let length = target_words.to_string();
    let prompt = prompts::render(template_id, &[("length", &length), ("prompt", &premise.text)])?;
    let text = judge.complete_text(RequestKind::Story, prompt)?;
    Ok(StoryRecord::new(
        format!("{}::{}", premise.id, judge.id()),
        text,
        Source::Model(judge.id().to_string()),
        Language::En,
    )
    .with_premise_id(&premise.id))
}

pub fn score_story(judge: &Judge, premise: &str, story: &StoryRecord) -> Result<DimensionScores> {
    if story.text().trim().is_empty() {
        return Err(Error::Invalid(format!("story `{}` has no text to score", story.id)));
    }
    let prompt = prompts::render(prompts::SCORE_TEMPLATE, &[("premise", premise), ("story", story.text())])?;
    let req = CompletionRequest::new(
        RequestKind::Score {
            story_id: story.id.clone(),
        },
        prompt,
    );
    judge.call(&req, parse::extract_scores)
}

/// Scores every candidate with every judge. Judges run concurrently; rows
/// land in panel order. Any failure fails the whole matrix.
pub fn panel_score(panel: &JudgePanel, candidates: &CandidateSet) -> Result<ScoreMatrix> {
    if candidates.candidates.len() < 2 {
        return Err(Error::Invalid(format!(
            "candidate set `{}` needs at least 2 stories",
            candidates.id
        )));
    }
    let results: Vec<Result<JudgeRow>> = std::thread::scope(|s| {
        let handles: Vec<_> = panel
            .judges
            .iter()
            .map(|judge| {
                s.spawn(move || {
                    let scores = candidates
                        .candidates
                        .iter()
                        .map(|story| score_story(judge, &candidates.premise.text, story))
                        .collect::<Result<Vec<_>>>()
                        .map_err(|e| Error::Judge {
                            judge: judge.id.clone(),
                            source: Box::new(e),
                        })?;
                    Ok(JudgeRow {
                        judge: judge.id.clone(),
                        scores,
                    })
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("judge thread panicked"))
            .collect()
    });
    let rows = results.into_iter().collect::<Result<Vec<_>>>()?;
    ScoreMatrix::new(candidates.id.clone(), candidates.ids(), rows)
}
