//! Story-preference benchmark toolkit: corpus handling, LLM judge panels,
//! rank agreement, dimensional categorization, training-pair construction,
//! reward-model evaluation and sentence-length stylometrics.

pub mod config;
pub mod construct;
pub mod corpus;
pub mod digest;
pub mod dimcat;
pub mod dimension;
pub mod error;
pub mod evalharness;
pub mod jsonl;
pub mod judgekit;
pub mod pairforge;
pub mod rankagree;
pub mod stylometrics;

pub use config::PipelineConfig;
pub use construct::{FinalDecision, FinalStatus, RoutedSet, TaskMode};
pub use corpus::{Corpus, DatasetStats, Language, Premise, Source, StoryRecord};
pub use dimcat::{categorize, CategorizationTrace, InstanceScores, Stage};
pub use dimension::{Dimension, DimensionScores};
pub use error::{Error, Result};
pub use evalharness::{BenchCandidate, BenchmarkInstance, EvalReport, RmAdapter, Subset, Verdict};
pub use jsonl::Provenance;
pub use judgekit::{CandidateSet, Judge, JudgePanel, ScoreMatrix};
pub use pairforge::{Method, PreferencePair, TrainingRecord};
pub use rankagree::{kendall_tau, AgreementRecord, Ranking, Route};
