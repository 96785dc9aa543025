//! Benchmark construction: candidate generation, agreement routing into
//! annotation modes, and assembly of categorized benchmark instances.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Premise, StoryRecord};
use crate::dimcat::{categorize, InstanceScores};
use crate::dimension::Dimension;
use crate::error::{Error, Result};
use crate::evalharness::{BenchCandidate, BenchmarkInstance, BENCHMARK_CANDIDATES};
use crate::judgekit::{generate_story, panel_score, CandidateSet, Judge, JudgePanel, ScoreMatrix};
use crate::rankagree::{majority_ranking, panel_agreement, judge_rankings, route, AgreementRecord, Ranking, Route};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationPlan {
    /// Template for premises without a human story.
    pub template: String,
    /// Template for premises that come with a human story.
    pub human_premise_template: String,
    pub target_words: usize,
    pub candidates_per_premise: usize,
}

/// One candidate set per premise. A premise with a human story in `humans`
/// (matched on `premise_id`, first in corpus order) keeps it and takes the
/// remaining slots from the first generators; otherwise every slot is
/// generated. Generation failures abort.
pub fn generate_candidates(
    premises: &[Premise],
    humans: &Corpus,
    generators: &[Judge],
    plan: &GenerationPlan,
) -> Result<Vec<CandidateSet>> {
    let m = plan.candidates_per_premise;
    if m < 2 {
        return Err(Error::Invalid(format!("candidate sets need at least 2 stories, asked for {m}")));
    }
    if generators.len() < m {
        return Err(Error::Invalid(format!(
            "{m} candidates per premise need {m} generators, have {}",
            generators.len()
        )));
    }
    let mut human_for: HashMap<&str, &StoryRecord> = HashMap::new();
    for s in humans.records().iter().filter(|s| s.source.is_human()) {
        if let Some(p) = &s.premise_id {
            human_for.entry(p.as_str()).or_insert(s);
        }
    }
    premises
        .par_iter()
        .map(|p| {
            let human = human_for.get(p.id.as_str()).copied();
            let (template, slots) = match human {
                Some(_) => (&plan.human_premise_template, m - 1),
                None => (&plan.template, m),
            };
            let mut stories: Vec<StoryRecord> = human.into_iter().cloned().collect();
            for g in &generators[..slots] {
                stories.push(generate_story(g, p, template, plan.target_words)?);
            }
            CandidateSet::new(p.clone(), stories)
        })
        .collect()
}

/// Panel scores for every set; sets are scored concurrently, output keeps
/// input order.
pub fn score_candidate_sets(panel: &JudgePanel, sets: &[CandidateSet]) -> Result<Vec<ScoreMatrix>> {
    sets.par_iter().map(|s| panel_score(panel, s)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskMode {
    FullRanking,
    Verification,
    HumanBestCheck,
}

/// A scored candidate set with its routing outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutedSet {
    pub candidate_set: CandidateSet,
    pub matrix: ScoreMatrix,
    pub agreement: AgreementRecord,
    pub threshold: f64,
    pub mode: TaskMode,
    /// Majority ranking; for a human best check, the human story first and
    /// the model stories in majority order after it.
    pub proposed_ranking: Ranking,
}

impl RoutedSet {
    pub fn id(&self) -> &str {
        &self.candidate_set.id
    }

    pub fn human_story(&self) -> Option<&StoryRecord> {
        let mut humans = self.candidate_set.candidates.iter().filter(|c| c.source.is_human());
        match (humans.next(), humans.next()) {
            (Some(h), None) => Some(h),
            _ => None,
        }
    }
}

/// Measures panel agreement and picks the annotation mode. A set holding
/// exactly one human story becomes a human best check, with agreement taken
/// over its model stories only.
pub fn route_candidate_set(set: CandidateSet, matrix: ScoreMatrix, threshold: f64) -> Result<RoutedSet> {
    if matrix.candidate_set_id != set.id {
        return Err(Error::Invalid(format!(
            "score matrix `{}` does not belong to candidate set `{}`",
            matrix.candidate_set_id, set.id
        )));
    }
    if !Ranking::is_permutation_of(&matrix.candidate_ids, &set.ids()) {
        return Err(Error::Invalid(format!("score matrix for `{}` covers different candidates", set.id)));
    }
    if matrix.judge_count() < 2 {
        return Err(Error::Invalid(format!("routing `{}` needs at least 2 judges", set.id)));
    }
    let humans: Vec<&StoryRecord> = set.candidates.iter().filter(|c| c.source.is_human()).collect();
    let judges: Vec<String> = matrix.rows.iter().map(|r| r.judge.clone()).collect();
    let (agree_on, mode_for_human) = if humans.len() == 1 {
        let models: Vec<String> = set.candidates.iter().filter(|c| !c.source.is_human()).map(|c| c.id.clone()).collect();
        (matrix.restrict(&models)?, true)
    } else {
        (matrix.clone(), false)
    };
    let report = panel_agreement(&judge_rankings(&agree_on)?)?;
    let decision = route(&report, threshold);
    let majority = majority_ranking(&agree_on)?;
    let (mode, proposed_ranking) = if mode_for_human {
        let mut order = vec![humans[0].id.clone()];
        order.extend(majority.order().iter().cloned());
        (TaskMode::HumanBestCheck, Ranking::from_order(order)?)
    } else {
        let mode = match decision.route {
            Route::HumanAnnotate => TaskMode::FullRanking,
            Route::AutoVerify => TaskMode::Verification,
        };
        (mode, majority)
    };
    Ok(RoutedSet {
        agreement: AgreementRecord::new(&set.id, &judges, &report, &decision),
        candidate_set: set,
        matrix,
        threshold,
        mode,
        proposed_ranking,
    })
}

/// Routes every set with the matrix carrying its id.
pub fn route_all(sets: Vec<CandidateSet>, matrices: Vec<ScoreMatrix>, threshold: f64) -> Result<Vec<RoutedSet>> {
    let mut by_id: HashMap<String, ScoreMatrix> = HashMap::new();
    for m in matrices {
        let id = m.candidate_set_id.clone();
        if by_id.insert(id.clone(), m).is_some() {
            return Err(Error::Invalid(format!("two score matrices for candidate set `{id}`")));
        }
    }
    sets.into_iter()
        .map(|s| {
            let m = by_id
                .remove(&s.id)
                .ok_or_else(|| Error::Invalid(format!("no score matrix for candidate set `{}`", s.id)))?;
            route_candidate_set(s, m, threshold)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinalStatus {
    Finalized,
    Dropped,
}

/// The human step's verdict on one candidate set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalDecision {
    pub candidate_set_id: String,
    pub status: FinalStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ranking: Option<Ranking>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotator: Option<String>,
}

/// Builds the benchmark instance for a finalized ranking: its best story is
/// chosen, and the dimension comes from the panel's mean scores.
pub fn assemble_instance(
    routed: &RoutedSet,
    final_ranking: &Ranking,
    tie_tolerance: f64,
    priority: &[Dimension; 5],
) -> Result<BenchmarkInstance> {
    let set = &routed.candidate_set;
    if set.candidates.len() != BENCHMARK_CANDIDATES {
        return Err(Error::Invalid(format!(
            "candidate set `{}` has {} stories, benchmark instances need {BENCHMARK_CANDIDATES}",
            set.id,
            set.candidates.len()
        )));
    }
    if !Ranking::is_permutation_of(final_ranking.order(), &set.ids()) {
        return Err(Error::Ranking(format!("final ranking for `{}` is not a permutation of its candidates", set.id)));
    }
    let best = final_ranking.best().expect("non-empty ranking");
    let chosen_index = set.candidates.iter().position(|c| c.id == best).expect("checked");
    let means = routed.matrix.mean_scores();
    let at = |id: &str| routed.matrix.position(id).expect("checked");
    let chosen = means[at(best)];
    let rejected: Vec<_> = set.candidates.iter().filter(|c| c.id != best).map(|c| means[at(&c.id)]).collect();
    let trace = categorize(&InstanceScores::from_scores(&chosen, &rejected)?, tie_tolerance, priority)?;
    let candidates = set.candidates.iter().map(BenchCandidate::from).collect();
    let mut inst = BenchmarkInstance::new(set.premise.text.clone(), candidates, chosen_index, trace.decided_dimension)?;
    inst.premise_id = Some(set.id.clone());
    inst.trace = Some(trace);
    Ok(inst)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssemblyCounts {
    pub finalized: usize,
    pub auto_confirmed: usize,
    pub dropped: usize,
    pub pending: usize,
}

/// Instances for every set with a finalized decision, in routed order.
/// Dropped sets are left out. With `auto_confirm`, verification and human
/// best-check sets without a decision take their proposed ranking; full
/// ranking sets always wait for a human.
pub fn build_benchmark(
    routed: &[RoutedSet],
    decisions: &[FinalDecision],
    auto_confirm: bool,
    tie_tolerance: f64,
    priority: &[Dimension; 5],
) -> Result<(Vec<BenchmarkInstance>, AssemblyCounts)> {
    let by_id: HashMap<&str, &FinalDecision> = decisions.iter().map(|d| (d.candidate_set_id.as_str(), d)).collect();
    let mut counts = AssemblyCounts::default();
    let mut out = Vec::new();
    for r in routed {
        let ranking = match by_id.get(r.id()) {
            Some(d) if d.status == FinalStatus::Dropped => {
                counts.dropped += 1;
                continue;
            }
            Some(d) => {
                counts.finalized += 1;
                d.ranking
                    .as_ref()
                    .ok_or_else(|| Error::Invalid(format!("finalized set `{}` has no ranking", d.candidate_set_id)))?
            }
            None if auto_confirm && r.mode != TaskMode::FullRanking => {
                counts.auto_confirmed += 1;
                &r.proposed_ranking
            }
            None => {
                counts.pending += 1;
                continue;
            }
        };
        out.push(assemble_instance(r, ranking, tie_tolerance, priority)?);
    }
    Ok((out, counts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Language, Source};
    use crate::dimcat::{DEFAULT_PRIORITY, DEFAULT_TIE_TOLERANCE};
    use crate::dimension::DimensionScores;
    use crate::evalharness::Subset;
    use crate::judgekit::{prompts, JudgeRow};

    fn model(id: &str) -> StoryRecord {
        StoryRecord::new(id, format!("story {id}"), Source::model("g"), Language::En)
    }

    fn set(human: bool) -> CandidateSet {
        let mut c: Vec<_> = ["a", "b", "c", "d"].iter().map(|i| model(i)).collect();
        if human {
            c[2] = StoryRecord::human("c", "the human one");
        }
        CandidateSet::new(Premise::new("p1", "A premise."), c).unwrap()
    }

    fn matrix(rows: &[[f64; 4]]) -> ScoreMatrix {
        let ids: Vec<String> = ["a", "b", "c", "d"].iter().map(|s| s.to_string()).collect();
        let rows = rows
            .iter()
            .enumerate()
            .map(|(j, r)| JudgeRow {
                judge: format!("j{j}"),
                scores: r.iter().map(|&o| DimensionScores::new([o; 5], o).unwrap()).collect(),
            })
            .collect();
        ScoreMatrix::new("p1", ids, rows).unwrap()
    }

    #[test]
    fn routes_by_agreement() {
        let agree = matrix(&[[9.0, 7.0, 5.0, 3.0], [9.0, 7.0, 5.0, 3.0]]);
        let r = route_candidate_set(set(false), agree, 0.6).unwrap();
        assert_eq!(r.mode, TaskMode::Verification);
        assert_eq!(r.proposed_ranking.order(), ["a", "b", "c", "d"]);
        let disagree = matrix(&[[9.0, 7.0, 5.0, 3.0], [3.0, 5.0, 7.0, 9.0]]);
        let r = route_candidate_set(set(false), disagree, 0.6).unwrap();
        assert_eq!(r.mode, TaskMode::FullRanking);
        assert_eq!(r.agreement.route, Route::HumanAnnotate);
        assert!(route_candidate_set(set(false), matrix(&[[1.0, 2.0, 3.0, 4.0]]), 0.6).is_err());
    }

    #[test]
    fn human_set_checks_human_first() {
        let m = matrix(&[[9.0, 7.0, 1.0, 3.0], [9.0, 7.0, 2.0, 3.0]]);
        let r = route_candidate_set(set(true), m, 0.6).unwrap();
        assert_eq!(r.mode, TaskMode::HumanBestCheck);
        assert_eq!(r.proposed_ranking.order(), ["c", "a", "b", "d"]);
        assert_eq!(r.agreement.tau_avg, 1.0);
        let (bench, counts) = build_benchmark(&[r], &[], true, DEFAULT_TIE_TOLERANCE, &DEFAULT_PRIORITY).unwrap();
        assert_eq!(counts.auto_confirmed, 1);
        assert_eq!(bench[0].subset, Subset::HumanLlm);
        assert_eq!(bench[0].chosen().id, "c");
    }

    #[test]
    fn benchmark_respects_decisions() {
        let agree = route_candidate_set(set(false), matrix(&[[9.0, 7.0, 5.0, 3.0], [9.0, 6.0, 5.0, 3.0]]), 0.6).unwrap();
        let mut other = set(false);
        other.id = "p2".into();
        other.premise.id = "p2".into();
        let mut m2 = matrix(&[[9.0, 7.0, 5.0, 3.0], [3.0, 5.0, 7.0, 9.0]]);
        m2.candidate_set_id = "p2".into();
        let full = route_candidate_set(other, m2, 0.6).unwrap();
        let routed = [agree, full];
        let (b, c) = build_benchmark(&routed, &[], true, 0.5, &DEFAULT_PRIORITY).unwrap();
        assert_eq!((b.len(), c.pending, c.auto_confirmed), (1, 1, 1));
        let drop = FinalDecision {
            candidate_set_id: "p1".into(),
            status: FinalStatus::Dropped,
            ranking: None,
            annotator: Some("x".into()),
        };
        let ranked = FinalDecision {
            candidate_set_id: "p2".into(),
            status: FinalStatus::Finalized,
            ranking: Some(Ranking::from_order(vec!["d".into(), "c".into(), "b".into(), "a".into()]).unwrap()),
            annotator: Some("y".into()),
        };
        let (b, c) = build_benchmark(&routed, &[drop, ranked], true, 0.5, &DEFAULT_PRIORITY).unwrap();
        assert_eq!((c.dropped, c.finalized), (1, 1));
        assert_eq!(b.len(), 1);
        assert_eq!(b[0].premise_id.as_deref(), Some("p2"));
        assert_eq!(b[0].chosen().id, "d");
        let bad = Ranking::from_order(vec!["a".into(), "b".into()]).unwrap();
        assert!(assemble_instance(&routed[0], &bad, 0.5, &DEFAULT_PRIORITY).is_err());
    }

    #[test]
    fn generation_fills_slots() {
        let premises = vec![Premise::new("p1", "One."), Premise::new("p2", "Two.")];
        let humans = Corpus::new("h", vec![StoryRecord::human("h1", "a human story").with_premise_id("p2")]).unwrap();
        let gens: Vec<_> = (0..4).map(|i| Judge::mock(format!("g{i}"), i)).collect();
        let plan = GenerationPlan {
            template: prompts::DEFAULT_STORY_TEMPLATE.into(),
            human_premise_template: "story.humanlike".into(),
            target_words: 100,
            candidates_per_premise: 4,
        };
        let sets = generate_candidates(&premises, &humans, &gens, &plan).unwrap();
        assert_eq!(sets[0].ids(), ["p1::g0", "p1::g1", "p1::g2", "p1::g3"]);
        assert_eq!(sets[1].ids(), ["h1", "p2::g0", "p2::g1", "p2::g2"]);
        assert_eq!(sets, generate_candidates(&premises, &humans, &gens, &plan).unwrap());
        assert!(generate_candidates(&premises, &humans, &gens[..3], &plan).is_err());
    }
}
