//! The annotation queue: tasks, atomic assignment, submission semantics,
//! quality-check sampling and the append-only event log.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use storypref_core::construct::{build_benchmark, FinalDecision, FinalStatus, RoutedSet, TaskMode};
use storypref_core::digest::hash64;
use storypref_core::{BenchmarkInstance, Dimension, Ranking};

#[derive(Debug, thiserror::Error)]
pub enum QueueError {
    #[error("no task `{0}`")]
    UnknownTask(String),
    #[error("task `{task}` is not assigned to `{annotator}`")]
    NotAssigned { task: String, annotator: String },
    #[error("task `{0}` is already final")]
    AlreadyFinal(String),
    #[error("outcome `{outcome}` is not allowed for a {mode} task")]
    OutcomeNotAllowed { outcome: &'static str, mode: &'static str },
    #[error("malformed ranking: {0}")]
    MalformedRanking(String),
    #[error("annotator id must not be empty")]
    MissingAnnotator,
    #[error("duplicate task `{0}`")]
    DuplicateTask(String),
    #[error("event log {path}: {message}")]
    Log { path: PathBuf, message: String },
    #[error(transparent)]
    Core(#[from] storypref_core::Error),
}

pub type QueueResult<T> = std::result::Result<T, QueueError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskStatus {
    Pending,
    Assigned,
    Submitted,
    Dropped,
}

fn mode_name(mode: TaskMode) -> &'static str {
    match mode {
        TaskMode::FullRanking => "full_ranking",
        TaskMode::Verification => "verification",
        TaskMode::HumanBestCheck => "human_best_check",
    }
}

/// A story as the annotator sees it: a presentation label and the text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskStory {
    pub label: String,
    pub text: String,
}

/// Task payload. Story ids and sources are never included; rankings are
/// expressed in presentation labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationTask {
    pub task_id: String,
    pub premise: String,
    pub stories: Vec<TaskStory>,
    pub mode: TaskMode,
    /// Present exactly for verification tasks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proposed_ranking: Option<Vec<String>>,
    /// The story to confirm as best, for human best-check tasks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub claimed_best: Option<String>,
    pub status: TaskStatus,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outcome {
    Ranking { ranking: Vec<String> },
    Confirmed,
    Overridden { ranking: Vec<String> },
    Unsure,
}

impl Outcome {
    fn name(&self) -> &'static str {
        match self {
            Outcome::Ranking { .. } => "ranking",
            Outcome::Confirmed => "confirmed",
            Outcome::Overridden { .. } => "overridden",
            Outcome::Unsure => "unsure",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationResult {
    pub task_id: String,
    pub annotator_id: String,
    pub outcome: Outcome,
    /// Milliseconds since the Unix epoch.
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QcFlag {
    pub task_id: String,
    pub annotator_id: String,
    /// 0-based window of `every_n` submissions the flag was drawn from.
    pub window: usize,
    /// 0-based position of the flagged submission in submission order.
    pub submission: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusCounts {
    pub pending: usize,
    pub assigned: usize,
    pub submitted: usize,
    pub dropped: usize,
}

impl StatusCounts {
    fn add(&mut self, s: TaskStatus) {
        match s {
            TaskStatus::Pending => self.pending += 1,
            TaskStatus::Assigned => self.assigned += 1,
            TaskStatus::Submitted => self.submitted += 1,
            TaskStatus::Dropped => self.dropped += 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub total: usize,
    #[serde(flatten)]
    pub counts: StatusCounts,
    pub by_mode: BTreeMap<String, StatusCounts>,
    pub qc_flags: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Assigned { task_id: String, annotator_id: String, timestamp: u64 },
    Submitted { result: AnnotationResult },
    Flagged { flag: QcFlag },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ack {
    pub task_id: String,
    pub status: TaskStatus,
}

struct Task {
    routed: RoutedSet,
    /// Presentation label to story id, in presentation order.
    labels: Vec<(String, String)>,
    status: TaskStatus,
    assignee: Option<String>,
    final_ranking: Option<Ranking>,
    result: Option<AnnotationResult>,
}

impl Task {
    fn label_of(&self, story_id: &str) -> &str {
        &self.labels.iter().find(|(_, id)| id == story_id).expect("story has a label").0
    }

    fn to_ids(&self, labels: &[String]) -> QueueResult<Ranking> {
        let known: HashMap<&str, &str> = self.labels.iter().map(|(l, id)| (l.as_str(), id.as_str())).collect();
        let mut seen = HashSet::new();
        let mut order = Vec::with_capacity(labels.len());
        for l in labels {
            let id = known
                .get(l.as_str())
                .ok_or_else(|| QueueError::MalformedRanking(format!("unknown story `{l}`")))?;
            if !seen.insert(l.as_str()) {
                return Err(QueueError::MalformedRanking(format!("story `{l}` listed twice")));
            }
            order.push(id.to_string());
        }
        if order.len() != self.labels.len() {
            return Err(QueueError::MalformedRanking(format!(
                "ranking lists {} of {} stories",
                order.len(),
                self.labels.len()
            )));
        }
        Ok(Ranking::from_order(order)?)
    }

    fn payload(&self) -> AnnotationTask {
        let set = &self.routed.candidate_set;
        let text_of = |id: &str| set.candidates.iter().find(|c| c.id == id).expect("labelled story").text();
        let mode = self.routed.mode;
        let proposed = self.routed.proposed_ranking.order();
        AnnotationTask {
            task_id: set.id.clone(),
            premise: set.premise.text.clone(),
            stories: self
                .labels
                .iter()
                .map(|(label, id)| TaskStory {
                    label: label.clone(),
                    text: text_of(id).to_string(),
                })
                .collect(),
            mode,
            proposed_ranking: (mode == TaskMode::Verification)
                .then(|| proposed.iter().map(|id| self.label_of(id).to_string()).collect()),
            claimed_best: (mode == TaskMode::HumanBestCheck).then(|| self.label_of(&proposed[0]).to_string()),
            status: self.status,
        }
    }

    /// The final ranking this outcome implies, or `None` for a drop.
    fn resolve(&self, outcome: &Outcome) -> QueueResult<Option<Ranking>> {
        let mode = self.routed.mode;
        let not_allowed = || QueueError::OutcomeNotAllowed {
            outcome: outcome.name(),
            mode: mode_name(mode),
        };
        match (mode, outcome) {
            (TaskMode::FullRanking, Outcome::Ranking { ranking }) => Ok(Some(self.to_ids(ranking)?)),
            (TaskMode::FullRanking, _) => Err(not_allowed()),
            (_, Outcome::Confirmed) => Ok(Some(self.routed.proposed_ranking.clone())),
            (_, Outcome::Overridden { ranking }) => Ok(Some(self.to_ids(ranking)?)),
            (_, Outcome::Unsure) => Ok(None),
            (_, Outcome::Ranking { .. }) => Err(not_allowed()),
        }
    }
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// Queue state. Not synchronized; the service wraps it in a mutex so every
/// transition, including its log write, is atomic.
pub struct Queue {
    tasks: Vec<Task>,
    index: HashMap<String, usize>,
    submissions: Vec<usize>,
    flags: Vec<QcFlag>,
    qc_every: usize,
    seed: u64,
    log: Option<(PathBuf, File)>,
}

impl Queue {
    pub fn new(routed: Vec<RoutedSet>, qc_every: usize, seed: u64) -> QueueResult<Self> {
        let mut index = HashMap::new();
        let mut tasks = Vec::with_capacity(routed.len());
        for r in routed {
            let id = r.id().to_string();
            if index.insert(id.clone(), tasks.len()).is_some() {
                return Err(QueueError::DuplicateTask(id));
            }
            let mut ids = r.candidate_set.ids();
            let mut rng = ChaCha8Rng::seed_from_u64(hash64(&[&seed.to_string(), "blind", &id]));
            ids.shuffle(&mut rng);
            let labels = ids.into_iter().enumerate().map(|(i, sid)| (format!("s{}", i + 1), sid)).collect();
            tasks.push(Task {
                routed: r,
                labels,
                status: TaskStatus::Pending,
                assignee: None,
                final_ranking: None,
                result: None,
            });
        }
        Ok(Queue {
            tasks,
            index,
            submissions: Vec::new(),
            flags: Vec::new(),
            qc_every: qc_every.max(1),
            seed,
            log: None,
        })
    }

    /// Replays `path` if it exists, then appends every later event to it.
    pub fn with_event_log(mut self, path: &Path) -> QueueResult<Self> {
        let log_err = |message: String| QueueError::Log {
            path: path.to_path_buf(),
            message,
        };
        if path.exists() {
            let file = File::open(path).map_err(|e| log_err(e.to_string()))?;
            for (n, line) in BufReader::new(file).lines().enumerate() {
                let line = line.map_err(|e| log_err(e.to_string()))?;
                if line.trim().is_empty() {
                    continue;
                }
                let event: Event = serde_json::from_str(&line).map_err(|e| log_err(format!("line {}: {e}", n + 1)))?;
                self.apply(event).map_err(|e| log_err(format!("line {}: {e}", n + 1)))?;
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| log_err(e.to_string()))?;
        self.log = Some((path.to_path_buf(), file));
        Ok(self)
    }

    fn apply(&mut self, event: Event) -> QueueResult<()> {
        match event {
            Event::Assigned { task_id, annotator_id, .. } => {
                let i = self.find(&task_id)?;
                let t = &mut self.tasks[i];
                if t.status != TaskStatus::Pending {
                    return Err(QueueError::AlreadyFinal(task_id));
                }
                t.status = TaskStatus::Assigned;
                t.assignee = Some(annotator_id);
            }
            Event::Submitted { result } => {
                self.check_submission(&result)?;
                self.finalize(result)?;
            }
            Event::Flagged { .. } => {}
        }
        Ok(())
    }

    fn record(&mut self, event: &Event) -> QueueResult<()> {
        if let Some((path, file)) = &mut self.log {
            let mut line = serde_json::to_string(event).expect("event serializes");
            line.push('\n');
            file.write_all(line.as_bytes())
                .and_then(|_| file.flush())
                .map_err(|e| QueueError::Log {
                    path: path.clone(),
                    message: e.to_string(),
                })?;
        }
        Ok(())
    }

    fn find(&self, task_id: &str) -> QueueResult<usize> {
        self.index
            .get(task_id)
            .copied()
            .ok_or_else(|| QueueError::UnknownTask(task_id.to_string()))
    }

    /// The caller's open task if it has one, else the first pending task,
    /// now assigned to the caller. `None` when nothing is pending.
    pub fn next_task(&mut self, annotator: &str) -> QueueResult<Option<AnnotationTask>> {
        if annotator.trim().is_empty() {
            return Err(QueueError::MissingAnnotator);
        }
        if let Some(t) = self
            .tasks
            .iter()
            .find(|t| t.status == TaskStatus::Assigned && t.assignee.as_deref() == Some(annotator))
        {
            return Ok(Some(t.payload()));
        }
        let Some(i) = self.tasks.iter().position(|t| t.status == TaskStatus::Pending) else {
            return Ok(None);
        };
        let event = Event::Assigned {
            task_id: self.tasks[i].routed.id().to_string(),
            annotator_id: annotator.to_string(),
            timestamp: now_ms(),
        };
        self.record(&event)?;
        self.apply(event)?;
        Ok(Some(self.tasks[i].payload()))
    }

    fn check_submission(&self, result: &AnnotationResult) -> QueueResult<Option<Ranking>> {
        let t = &self.tasks[self.find(&result.task_id)?];
        match t.status {
            TaskStatus::Submitted | TaskStatus::Dropped => return Err(QueueError::AlreadyFinal(result.task_id.clone())),
            TaskStatus::Pending => {
                return Err(QueueError::NotAssigned {
                    task: result.task_id.clone(),
                    annotator: result.annotator_id.clone(),
                })
            }
            TaskStatus::Assigned => {}
        }
        if t.assignee.as_deref() != Some(result.annotator_id.as_str()) {
            return Err(QueueError::NotAssigned {
                task: result.task_id.clone(),
                annotator: result.annotator_id.clone(),
            });
        }
        t.resolve(&result.outcome)
    }

    fn finalize(&mut self, result: AnnotationResult) -> QueueResult<()> {
        let i = self.find(&result.task_id)?;
        let ranking = self.tasks[i].resolve(&result.outcome)?;
        let t = &mut self.tasks[i];
        t.status = if ranking.is_some() { TaskStatus::Submitted } else { TaskStatus::Dropped };
        t.final_ranking = ranking;
        t.result = Some(result);
        self.submissions.push(i);
        let k = self.submissions.len();
        if k.is_multiple_of(self.qc_every) {
            let window = k / self.qc_every - 1;
            let mut rng = ChaCha8Rng::seed_from_u64(hash64(&[&self.seed.to_string(), "qc", &window.to_string()]));
            let submission = window * self.qc_every + rng.random_range(0..self.qc_every);
            let task = &self.tasks[self.submissions[submission]];
            self.flags.push(QcFlag {
                task_id: task.routed.id().to_string(),
                annotator_id: task.result.as_ref().expect("submitted").annotator_id.clone(),
                window,
                submission,
            });
        }
        Ok(())
    }

    /// Finalizes an assigned task. Returns the task's new status.
    pub fn submit(&mut self, task_id: &str, annotator: &str, outcome: Outcome) -> QueueResult<Ack> {
        let result = AnnotationResult {
            task_id: task_id.to_string(),
            annotator_id: annotator.to_string(),
            outcome,
            timestamp: now_ms(),
        };
        self.check_submission(&result)?;
        let flags_before = self.flags.len();
        let event = Event::Submitted { result };
        self.record(&event)?;
        self.apply(event)?;
        let new_flags = self.flags.split_off(flags_before);
        self.flags.extend(new_flags.iter().cloned());
        for flag in new_flags {
            self.record(&Event::Flagged { flag })?;
        }
        let t = &self.tasks[self.find(task_id)?];
        Ok(Ack {
            task_id: task_id.to_string(),
            status: t.status,
        })
    }

    pub fn task(&self, task_id: &str) -> QueueResult<AnnotationTask> {
        Ok(self.tasks[self.find(task_id)?].payload())
    }

    pub fn qc_flags(&self) -> &[QcFlag] {
        &self.flags
    }

    pub fn progress(&self) -> Progress {
        let mut counts = StatusCounts::default();
        let mut by_mode: BTreeMap<String, StatusCounts> = BTreeMap::new();
        for t in &self.tasks {
            counts.add(t.status);
            by_mode.entry(mode_name(t.routed.mode).to_string()).or_default().add(t.status);
        }
        Progress {
            total: self.tasks.len(),
            counts,
            by_mode,
            qc_flags: self.flags.len(),
        }
    }

    pub fn results(&self) -> Vec<AnnotationResult> {
        self.submissions
            .iter()
            .filter_map(|&i| self.tasks[i].result.clone())
            .collect()
    }

    /// One decision per submitted or dropped task, in queue order.
    pub fn decisions(&self) -> Vec<FinalDecision> {
        self.tasks
            .iter()
            .filter_map(|t| {
                let annotator = t.result.as_ref().map(|r| r.annotator_id.clone());
                match t.status {
                    TaskStatus::Submitted => Some(FinalDecision {
                        candidate_set_id: t.routed.id().to_string(),
                        status: FinalStatus::Finalized,
                        ranking: t.final_ranking.clone(),
                        annotator,
                    }),
                    TaskStatus::Dropped => Some(FinalDecision {
                        candidate_set_id: t.routed.id().to_string(),
                        status: FinalStatus::Dropped,
                        ranking: None,
                        annotator,
                    }),
                    _ => None,
                }
            })
            .collect()
    }

    /// Benchmark instances for every finalized task. Dropped and
    /// unfinished tasks are absent.
    pub fn export_benchmark(&self, tie_tolerance: f64, priority: &[Dimension; 5]) -> QueueResult<Vec<BenchmarkInstance>> {
        let routed: Vec<RoutedSet> = self.tasks.iter().map(|t| t.routed.clone()).collect();
        Ok(build_benchmark(&routed, &self.decisions(), false, tie_tolerance, priority)?.0)
    }
}
