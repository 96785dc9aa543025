//! Completion backends: the trait, a seeded mock, a scripted backend for
//! fault injection, and an OpenAI-compatible HTTP client.

use std::collections::VecDeque;
use std::sync::Mutex;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::digest::hash64;
use crate::dimension::{Dimension, SCORE_MAX};

/// What a request is for. Remote backends only see the prompt; the mock
/// uses the kind to shape a plausible reply.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RequestKind {
    /// Write a story from a premise.
    Story,
    /// Score one story; the id keys the mock's scores.
    Score { story_id: String },
    /// Derive a premise from two stories.
    Premise,
    /// Rewrite an existing story.
    Rewrite,
    /// Continue or re-tell a story from its beginning.
    Continuation,
}

#[derive(Debug, Clone)]
pub struct CompletionRequest {
    pub kind: RequestKind,
    pub prompt: String,
}

impl CompletionRequest {
    pub fn new(kind: RequestKind, prompt: impl Into<String>) -> Self {
        CompletionRequest {
            kind,
            prompt: prompt.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct BackendError(pub String);

pub trait Backend: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError>;
}

/// Deterministic stand-in for a language model.
///
/// Every reply is a pure function of `(seed, backend id, request)`. Scores
/// depend on the story id only, never on the prompt text, so a judge gives a
/// story the same scores however it is asked.
#[derive(Debug, Clone)]
pub struct MockBackend {
    id: String,
    seed: u64,
    min_words: usize,
    max_words: usize,
}

const VOCAB: &[&str] = &[
    "the", "a", "lantern", "river", "silence", "she", "he", "remembered", "quietly", "glass",
    "city", "letter", "winter", "burned", "under", "archive", "old", "never", "again", "door",
    "voices", "map", "salt", "whispered", "between", "clock", "stranger", "long", "after",
    "orchard", "fever", "promise", "lost", "bright", "ash", "through", "harbor", "truth",
    "returned", "small", "mirror", "rain", "their", "hands", "forgot", "north", "bell",
    "photograph", "slowly", "broken", "garden", "witness", "ink", "before", "kept", "dust",
    "stairs", "morning", "ghost", "answer", "waited", "paper", "storm", "child", "nobody",
];

impl MockBackend {
    pub fn new(id: impl Into<String>, seed: u64) -> Self {
        MockBackend {
            id: id.into(),
            seed,
            min_words: 150,
            max_words: 400,
        }
    }

    /// Story-length range for generated texts (inclusive).
    pub fn with_story_words(mut self, min: usize, max: usize) -> Self {
        self.min_words = min.max(1);
        self.max_words = max.max(self.min_words);
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    fn rng(&self, parts: &[&str]) -> ChaCha8Rng {
        let seed = self.seed.to_string();
        let mut all = vec![seed.as_str(), self.id.as_str()];
        all.extend_from_slice(parts);
        ChaCha8Rng::seed_from_u64(hash64(&all))
    }

    /// Scores on a half-point grid: a per-story quality shared by all
    /// judges plus a per-judge offset, so panels agree sometimes.
    pub fn scores_for(&self, story_id: &str) -> [f64; 6] {
        let seed = self.seed.to_string();
        let quality = 6 + (hash64(&[&seed, "quality", story_id]) % 9) as i64; // 6..=14 half-points
        let mut out = [0.0; 6];
        for (i, d) in Dimension::ALL.iter().enumerate() {
            let off = (hash64(&[&seed, &self.id, story_id, d.as_str()]) % 9) as i64 - 4;
            out[i] = half_points(quality + off);
        }
        let mean2 = out[..5].iter().map(|v| v * 2.0).sum::<f64>() / 5.0;
        let off = (hash64(&[&seed, &self.id, story_id, "overall"]) % 5) as i64 - 2;
        out[5] = half_points(mean2.round() as i64 + off);
        out
    }

    fn sentence(rng: &mut ChaCha8Rng, words: usize) -> String {
        let mut s = String::new();
        for i in 0..words {
            let w = VOCAB[rng.random_range(0..VOCAB.len())];
            if i == 0 {
                let mut c = w.chars();
                let first = c.next().unwrap().to_ascii_uppercase();
                s.push(first);
                s.push_str(c.as_str());
            } else {
                s.push(' ');
                s.push_str(w);
            }
        }
        let end = match rng.random_range(0..10) {
            0 => '!',
            1 => '?',
            _ => '.',
        };
        s.push(end);
        s
    }

    fn prose(&self, rng: &mut ChaCha8Rng, target: usize) -> String {
        let mut sentences = Vec::new();
        let mut total = 0;
        while total < target {
            // Mostly medium sentences with occasional very short or long ones.
            let len = match rng.random_range(0..10) {
                0 => rng.random_range(1..4),
                1 => rng.random_range(25..45),
                _ => rng.random_range(8..18),
            };
            let len = len.min(target - total).max(1);
            sentences.push(Self::sentence(rng, len));
            total += len;
        }
        sentences.join(" ")
    }
}

fn half_points(h: i64) -> f64 {
    (h.clamp(0, (SCORE_MAX * 2.0) as i64) as f64) / 2.0
}

impl Backend for MockBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        match &request.kind {
            RequestKind::Score { story_id } => {
                let s = self.scores_for(story_id);
                Ok(format!(
                    "Here is my assessment.\n{{\"creativity\": {}, \"coherence\": {}, \"fluency\": {}, \"characterization\": {}, \"relevance\": {}, \"overall\": {}}}",
                    s[0], s[1], s[2], s[3], s[4], s[5]
                ))
            }
            RequestKind::Premise => {
                let mut rng = self.rng(&["premise", &request.prompt]);
                let n = rng.random_range(12..20);
                Ok(Self::sentence(&mut rng, n))
            }
            RequestKind::Story | RequestKind::Rewrite | RequestKind::Continuation => {
                let mut rng = self.rng(&["text", &request.prompt]);
                let target = rng.random_range(self.min_words..=self.max_words);
                Ok(self.prose(&mut rng, target))
            }
        }
    }
}

/// Replays a fixed script of replies, then repeats the last one.
///
/// Used to inject failures, malformed scores and degenerate rewrites.
#[derive(Debug)]
pub struct ScriptedBackend {
    script: Mutex<VecDeque<Result<String, BackendError>>>,
    last: Mutex<Option<Result<String, BackendError>>>,
    calls: std::sync::atomic::AtomicUsize,
}

impl ScriptedBackend {
    pub fn new(script: Vec<Result<String, BackendError>>) -> Self {
        ScriptedBackend {
            script: Mutex::new(script.into()),
            last: Mutex::new(None),
            calls: Default::default(),
        }
    }

    pub fn always(reply: impl Into<String>) -> Self {
        Self::new(vec![Ok(reply.into())])
    }

    pub fn failing(message: impl Into<String>) -> Self {
        Self::new(vec![Err(BackendError(message.into()))])
    }

    pub fn calls(&self) -> usize {
        self.calls.load(std::sync::atomic::Ordering::SeqCst)
    }
}

impl Backend for ScriptedBackend {
    fn complete(&self, _request: &CompletionRequest) -> Result<String, BackendError> {
        self.calls.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
        let next = self.script.lock().unwrap().pop_front();
        let mut last = self.last.lock().unwrap();
        match next {
            Some(r) => {
                *last = Some(r.clone());
                r
            }
            None => last
                .clone()
                .unwrap_or_else(|| Err(BackendError("empty script".into()))),
        }
    }
}

/// Echoes the part of the prompt after its first `Content: ` marker, or the
/// whole prompt. Handy as a degenerate rewriter.
#[derive(Debug, Default)]
pub struct EchoBackend;

impl Backend for EchoBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        let p = &request.prompt;
        let body = match p.find("Content: ") {
            Some(i) => {
                let rest = &p[i + "Content: ".len()..];
                rest.rsplit_once('\n').map_or(rest, |(c, _)| c)
            }
            None => p.as_str(),
        };
        Ok(body.to_string())
    }
}

/// Chat-completions client for OpenAI-compatible endpoints.
pub struct HttpBackend {
    endpoint: String,
    model: String,
    token: Option<String>,
    agent: ureq::Agent,
}

impl HttpBackend {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>, token: Option<String>, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(true)
            .build()
            .into();
        HttpBackend {
            endpoint: endpoint.into(),
            model: model.into(),
            token,
            agent,
        }
    }
}

impl Backend for HttpBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        let body = serde_json::json!({
            "model": self.model,
            "messages": [{"role": "user", "content": request.prompt}],
        });
        let mut req = self.agent.post(&self.endpoint);
        if let Some(t) = &self.token {
            req = req.header("Authorization", &format!("Bearer {t}"));
        }
        let mut resp = req
            .send_json(&body)
            .map_err(|e| BackendError(format!("request to {} failed: {e}", self.endpoint)))?;
        let v: serde_json::Value = resp
            .body_mut()
            .read_json()
            .map_err(|e| BackendError(format!("bad response body: {e}")))?;
        v.pointer("/choices/0/message/content")
            .and_then(|c| c.as_str())
            .map(str::to_string)
            .ok_or_else(|| BackendError("response has no choices[0].message.content".into()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetryPolicy {
    pub attempts: u32,
    /// Delay before the second attempt; doubles on every further attempt.
    pub base_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            attempts: 3,
            base_delay_ms: 250,
        }
    }
}

impl RetryPolicy {
    pub fn immediate(attempts: u32) -> Self {
        RetryPolicy {
            attempts,
            base_delay_ms: 0,
        }
    }

    pub fn delay_before(&self, attempt: u32) -> Duration {
        if attempt <= 1 {
            return Duration::ZERO;
        }
        Duration::from_millis(self.base_delay_ms.saturating_mul(1 << (attempt - 2).min(20)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendKind {
    Mock {
        /// Falls back to the pipeline seed.
        #[serde(default)]
        seed: Option<u64>,
        #[serde(default = "default_mock_min")]
        min_words: usize,
        #[serde(default = "default_mock_max")]
        max_words: usize,
    },
    Http {
        endpoint: String,
        model: String,
        /// Name of the environment variable holding the bearer token.
        #[serde(default)]
        auth_env: Option<String>,
        #[serde(default = "default_timeout")]
        timeout_secs: u64,
    },
}

fn default_mock_min() -> usize {
    150
}

fn default_mock_max() -> usize {
    400
}

fn default_timeout() -> u64 {
    120
}

/// One entry of the backend section of a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    pub name: String,
    #[serde(flatten)]
    pub kind: BackendKind,
    #[serde(default)]
    pub retry: RetryPolicy,
}

impl BackendConfig {
    pub fn mock(name: impl Into<String>) -> Self {
        BackendConfig {
            name: name.into(),
            kind: BackendKind::Mock {
                seed: None,
                min_words: default_mock_min(),
                max_words: default_mock_max(),
            },
            retry: RetryPolicy::default(),
        }
    }

    pub fn build_backend(&self, default_seed: u64) -> crate::Result<Box<dyn Backend>> {
        match &self.kind {
            BackendKind::Mock {
                seed,
                min_words,
                max_words,
            } => Ok(Box::new(
                MockBackend::new(&self.name, seed.unwrap_or(default_seed))
                    .with_story_words(*min_words, *max_words),
            )),
            BackendKind::Http {
                endpoint,
                model,
                auth_env,
                timeout_secs,
            } => {
                let token = match auth_env {
                    Some(var) => Some(std::env::var(var).map_err(|_| {
                        crate::Error::Config(format!(
                            "backend `{}`: environment variable `{var}` is not set",
                            self.name
                        ))
                    })?),
                    None => None,
                };
                Ok(Box::new(HttpBackend::new(
                    endpoint,
                    model,
                    token,
                    Duration::from_secs(*timeout_secs),
                )))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn score_req(id: &str) -> CompletionRequest {
        CompletionRequest::new(RequestKind::Score { story_id: id.into() }, "ignored")
    }

    #[test]
    fn mock_is_pure() {
        let a = MockBackend::new("j1", 7);
        let b = MockBackend::new("j1", 7);
        let r = CompletionRequest::new(RequestKind::Story, "Premise: a lighthouse");
        assert_eq!(a.complete(&r).unwrap(), b.complete(&r).unwrap());
        assert_eq!(a.complete(&score_req("s1")).unwrap(), b.complete(&score_req("s1")).unwrap());
        assert_ne!(
            MockBackend::new("j1", 8).complete(&r).unwrap(),
            a.complete(&r).unwrap()
        );
    }

    #[test]
    fn mock_scores_on_scale_and_keyed_by_judge() {
        let mut differs = false;
        for i in 0..50 {
            let id = format!("s{i}");
            let x = MockBackend::new("j1", 1).scores_for(&id);
            let y = MockBackend::new("j2", 1).scores_for(&id);
            assert!(x.iter().chain(&y).all(|v| (0.0..=10.0).contains(v)));
            differs |= x != y;
        }
        assert!(differs);
    }

    #[test]
    fn mock_story_length_in_range() {
        let m = MockBackend::new("g", 3).with_story_words(120, 130);
        for p in ["a", "b", "c"] {
            let t = m.complete(&CompletionRequest::new(RequestKind::Story, p)).unwrap();
            let n = t.split_whitespace().count();
            assert!((120..=130).contains(&n), "{n}");
        }
    }

    #[test]
    fn scripted_replays_then_repeats() {
        let s = ScriptedBackend::new(vec![Err(BackendError("x".into())), Ok("y".into())]);
        let r = score_req("a");
        assert!(s.complete(&r).is_err());
        assert_eq!(s.complete(&r).unwrap(), "y");
        assert_eq!(s.complete(&r).unwrap(), "y");
        assert_eq!(s.calls(), 3);
    }

    #[test]
    fn echo_returns_content() {
        let r = CompletionRequest::new(RequestKind::Rewrite, "Title: t\nContent: the body\nRewrite the ending:");
        assert_eq!(EchoBackend.complete(&r).unwrap(), "the body");
    }

    #[test]
    fn backoff_doubles() {
        let p = RetryPolicy { attempts: 4, base_delay_ms: 100 };
        let d: Vec<u128> = (1..=4).map(|a| p.delay_before(a).as_millis()).collect();
        assert_eq!(d, vec![0, 100, 200, 400]);
    }

    #[test]
    fn config_parses_from_toml() {
        let cfg: BackendConfig = toml::from_str(
            "name = \"gpt\"\nkind = \"http\"\nendpoint = \"http://localhost:1/v1/chat/completions\"\nmodel = \"m\"\nauth_env = \"TOKEN_X\"\n[retry]\nattempts = 5\n",
        )
        .unwrap();
        assert_eq!(cfg.retry.attempts, 5);
        assert!(matches!(cfg.kind, BackendKind::Http { timeout_secs: 120, .. }));
        let m: BackendConfig = toml::from_str("name = \"m\"\nkind = \"mock\"\nseed = 3\n").unwrap();
        assert!(matches!(m.kind, BackendKind::Mock { seed: Some(3), .. }));
    }
}
