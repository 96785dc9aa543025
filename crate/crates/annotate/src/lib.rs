//! Annotation workflow service: a persisted task queue with atomic
//! assignment, mode-specific submission rules, quality-check sampling and
//! an HTTP API for annotator clients.

pub mod queue;
pub mod server;

pub use queue::{Ack, AnnotationResult, AnnotationTask, Event, Outcome, Progress, QcFlag, Queue, QueueError, TaskStatus, TaskStory};
pub use server::{router, serve, spawn, RunningServer, Service, ANNOTATOR_HEADER};
