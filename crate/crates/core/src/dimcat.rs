//! Which dimension best separates a chosen story from its rejected
//! alternatives.
//!
//! Four stages, each narrowing the surviving dimensions:
//!
//! 1. keep dimensions whose mean gap (chosen minus rejected mean) is within
//!    the tie tolerance of the largest mean gap;
//! 2. of those, keep the ones whose margin over the best rejected story is
//!    within tolerance of the largest margin;
//! 3. of those, keep the ones whose rejected-score variance is within
//!    tolerance of the smallest variance;
//! 4. take the earliest survivor in priority order.
//!
//! A stage that leaves a single dimension decides. "Within tolerance" is
//! inclusive: a lead of exactly the tolerance is still a tie.

use serde::{Deserialize, Serialize};

use crate::dimension::{Dimension, DimensionScores};
use crate::error::{Error, Result};

pub const DEFAULT_TIE_TOLERANCE: f64 = 0.5;

/// Slack added to every tolerance comparison so that floating-point noise
/// in the metrics (from shifted or averaged scores) cannot flip a tie.
pub const COMPARISON_SLACK: f64 = 1e-9;

pub const DEFAULT_PRIORITY: [Dimension; 5] = Dimension::ALL;

/// Per-dimension values of the chosen story and the rejected stories.
/// The overall score plays no part here.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceScores {
    chosen: [f64; 5],
    rejected: Vec<[f64; 5]>,
}

impl InstanceScores {
    pub fn new(chosen: [f64; 5], rejected: Vec<[f64; 5]>) -> Result<Self> {
        if rejected.is_empty() {
            return Err(Error::Invalid("categorization needs at least one rejected story".into()));
        }
        if chosen.iter().chain(rejected.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::Invalid("non-finite score in categorization input".into()));
        }
        Ok(InstanceScores { chosen, rejected })
    }

    pub fn from_scores(chosen: &DimensionScores, rejected: &[DimensionScores]) -> Result<Self> {
        Self::new(chosen.dims(), rejected.iter().map(DimensionScores::dims).collect())
    }

    pub fn chosen(&self) -> &[f64; 5] {
        &self.chosen
    }

    pub fn rejected(&self) -> &[[f64; 5]] {
        &self.rejected
    }

    /// Every score moved by `c`.
    pub fn shifted(&self, c: f64) -> Self {
        InstanceScores {
            chosen: self.chosen.map(|v| v + c),
            rejected: self.rejected.iter().map(|r| r.map(|v| v + c)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageMetrics {
    pub mean_gaps: [f64; 5],
    pub margins: [f64; 5],
    /// Population variance of the rejected scores.
    pub rejected_variances: [f64; 5],
}

pub fn stage_metrics(s: &InstanceScores) -> StageMetrics {
    let n = s.rejected.len() as f64;
    let mut m = StageMetrics {
        mean_gaps: [0.0; 5],
        margins: [0.0; 5],
        rejected_variances: [0.0; 5],
    };
    for d in 0..5 {
        let col: Vec<f64> = s.rejected.iter().map(|r| r[d]).collect();
        let mean = col.iter().sum::<f64>() / n;
        let max = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        m.mean_gaps[d] = s.chosen[d] - mean;
        m.margins[d] = s.chosen[d] - max;
        m.rejected_variances[d] = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    }
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Stage {
    MeanGap = 1,
    Margin = 2,
    Variance = 3,
    Priority = 4,
}

impl From<Stage> for u8 {
    fn from(s: Stage) -> u8 {
        s as u8
    }
}

impl TryFrom<u8> for Stage {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, String> {
        match v {
            1 => Ok(Stage::MeanGap),
            2 => Ok(Stage::Margin),
            3 => Ok(Stage::Variance),
            4 => Ok(Stage::Priority),
            _ => Err(format!("no stage {v}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategorizationTrace {
    #[serde(flatten)]
    pub metrics: StageMetrics,
    pub stage_decided: Stage,
    pub decided_dimension: Dimension,
    pub tie_tolerance: f64,
    /// Survivors after each stage that ran, in canonical order.
    pub survivors: Vec<Vec<Dimension>>,
}

pub fn categorize(s: &InstanceScores, tie_tolerance: f64, priority: &[Dimension; 5]) -> Result<CategorizationTrace> {
    decide(stage_metrics(s), tie_tolerance, priority)
}

/// The staged selection applied to precomputed metrics.
pub fn decide(metrics: StageMetrics, tie_tolerance: f64, priority: &[Dimension; 5]) -> Result<CategorizationTrace> {
    if tie_tolerance.is_nan() || tie_tolerance < 0.0 {
        return Err(Error::Invalid(format!("tie tolerance {tie_tolerance} must be >= 0")));
    }
    check_priority(priority)?;
    let tol = tie_tolerance + COMPARISON_SLACK;

    let mut alive: Vec<Dimension> = Dimension::ALL.to_vec();
    let mut survivors = Vec::new();
    let stages: [(Stage, &[f64; 5], bool); 3] = [
        (Stage::MeanGap, &metrics.mean_gaps, true),
        (Stage::Margin, &metrics.margins, true),
        (Stage::Variance, &metrics.rejected_variances, false),
    ];
    for (stage, values, higher_is_better) in stages {
        let vals = alive.iter().map(|d| values[d.index()]);
        let best = if higher_is_better {
            vals.fold(f64::NEG_INFINITY, f64::max)
        } else {
            vals.fold(f64::INFINITY, f64::min)
        };
        alive.retain(|d| {
            let v = values[d.index()];
            let behind = if higher_is_better { best - v } else { v - best };
            behind <= tol
        });
        survivors.push(alive.clone());
        if alive.len() == 1 {
            return Ok(CategorizationTrace {
                metrics,
                stage_decided: stage,
                decided_dimension: alive[0],
                tie_tolerance,
                survivors,
            });
        }
    }
    let decided = *priority
        .iter()
        .find(|d| alive.contains(d))
        .expect("at least one dimension always survives");
    Ok(CategorizationTrace {
        metrics,
        stage_decided: Stage::Priority,
        decided_dimension: decided,
        tie_tolerance,
        survivors,
    })
}

pub fn check_priority(priority: &[Dimension; 5]) -> Result<()> {
    for d in Dimension::ALL {
        if !priority.contains(&d) {
            return Err(Error::Invalid(format!("priority order is missing `{d}`")));
        }
    }
    Ok(())
}
