//! Rankings from scores, Kendall's tau agreement across a judge panel, and
//! routing of candidate sets to verification or full annotation.
//!
//! Rankings are strict permutations. Score ties are broken by ascending
//! candidate id before any tau is computed, so tau is always over
//! `C(m, 2)` untied pairs.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::dimension::order_free_mean;
use crate::error::{Error, Result};
use crate::judgekit::ScoreMatrix;

pub const DEFAULT_AGREEMENT_THRESHOLD: f64 = 0.6;

/// Candidates best first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ranking {
    order: Vec<String>,
    rank_of: HashMap<String, usize>,
}

impl Ranking {
    /// Builds a ranking from a best-first list; ids must be distinct.
    pub fn from_order(order: Vec<String>) -> Result<Self> {
        let mut rank_of = HashMap::with_capacity(order.len());
        for (i, id) in order.iter().enumerate() {
            if rank_of.insert(id.clone(), i + 1).is_some() {
                return Err(Error::Ranking(format!("`{id}` appears twice")));
            }
        }
        Ok(Ranking { order, rank_of })
    }

    pub fn order(&self) -> &[String] {
        &self.order
    }

    /// 1-based position.
    pub fn rank_of(&self, id: &str) -> Option<usize> {
        self.rank_of.get(id).copied()
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn best(&self) -> Option<&str> {
        self.order.first().map(String::as_str)
    }

    pub fn reversed(&self) -> Ranking {
        Ranking::from_order(self.order.iter().rev().cloned().collect()).expect("still distinct")
    }

    pub fn same_items(&self, other: &Ranking) -> bool {
        self.len() == other.len() && self.order.iter().all(|id| other.rank_of.contains_key(id))
    }

    /// True when `ids` is a reordering of this ranking's candidates.
    pub fn is_permutation_of(ids: &[String], items: &[String]) -> bool {
        let a: HashSet<&String> = ids.iter().collect();
        let b: HashSet<&String> = items.iter().collect();
        ids.len() == items.len() && a.len() == ids.len() && a == b
    }
}

impl Serialize for Ranking {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.order.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Ranking {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ranking::from_order(Vec::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

/// Descending by score; equal scores fall back to ascending id.
pub fn ranking_from_scores(scores: &[f64], candidate_ids: &[String]) -> Result<Ranking> {
    if scores.len() != candidate_ids.len() {
        return Err(Error::Ranking(format!(
            "{} scores for {} candidates",
            scores.len(),
            candidate_ids.len()
        )));
    }
    if let Some(bad) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::Ranking(format!("non-finite score {bad}")));
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| {
        scores[b]
            .total_cmp(&scores[a])
            .then_with(|| candidate_ids[a].cmp(&candidate_ids[b]))
    });
    Ranking::from_order(idx.into_iter().map(|i| candidate_ids[i].clone()).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairCounts {
    pub concordant: usize,
    pub discordant: usize,
}

pub fn pair_counts(a: &Ranking, b: &Ranking) -> Result<PairCounts> {
    if !a.same_items(b) {
        return Err(Error::Ranking("rankings cover different candidates".into()));
    }
    let ids = a.order();
    let (mut concordant, mut discordant) = (0, 0);
    for i in 0..ids.len() {
        for j in i + 1..ids.len() {
            // a places ids[i] above ids[j]; check whether b agrees.
            if b.rank_of[&ids[i]] < b.rank_of[&ids[j]] {
                concordant += 1;
            } else {
                discordant += 1;
            }
        }
    }
    Ok(PairCounts {
        concordant,
        discordant,
    })
}

/// `(N_c - N_d) / C(m, 2)`.
pub fn kendall_tau(a: &Ranking, b: &Ranking) -> Result<f64> {
    let c = pair_counts(a, b)?;
    let m = a.len();
    if m < 2 {
        return Err(Error::Ranking("kendall tau needs at least 2 candidates".into()));
    }
    let pairs = m * (m - 1) / 2;
    Ok((c.concordant as f64 - c.discordant as f64) / pairs as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairAgreement {
    /// Indices into the panel, `i < j`.
    pub i: usize,
    pub j: usize,
    pub tau: f64,
    pub concordant: usize,
    pub discordant: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub pairs: Vec<PairAgreement>,
    pub tau_avg: f64,
}

impl AgreementReport {
    /// A report carrying only an average, for routing fixtures and callers
    /// that computed tau elsewhere.
    pub fn from_tau_avg(tau_avg: f64) -> Self {
        AgreementReport {
            pairs: Vec::new(),
            tau_avg,
        }
    }
}

/// Mean of tau over all `n(n-1)/2` judge pairs.
pub fn panel_agreement(rankings: &[Ranking]) -> Result<AgreementReport> {
    if rankings.len() < 2 {
        return Err(Error::Ranking(format!(
            "agreement needs at least 2 rankings, got {}",
            rankings.len()
        )));
    }
    let mut pairs = Vec::new();
    for i in 0..rankings.len() {
        for j in i + 1..rankings.len() {
            let c = pair_counts(&rankings[i], &rankings[j])?;
            pairs.push(PairAgreement {
                i,
                j,
                tau: kendall_tau(&rankings[i], &rankings[j])?,
                concordant: c.concordant,
                discordant: c.discordant,
            });
        }
    }
    let tau_avg = pairs.iter().map(|p| p.tau).sum::<f64>() / pairs.len() as f64;
    Ok(AgreementReport { pairs, tau_avg })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    AutoVerify,
    HumanAnnotate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoutingDecision {
    pub route: Route,
    pub tau_avg: f64,
    pub threshold: f64,
}

/// Full human annotation iff `tau_avg < threshold`; equality auto-verifies.
pub fn route(report: &AgreementReport, threshold: f64) -> RoutingDecision {
    RoutingDecision {
        route: if report.tau_avg < threshold {
            Route::HumanAnnotate
        } else {
            Route::AutoVerify
        },
        tau_avg: report.tau_avg,
        threshold,
    }
}

/// Each judge's ranking of the matrix's candidates by overall score.
pub fn judge_rankings(matrix: &ScoreMatrix) -> Result<Vec<Ranking>> {
    matrix
        .rows
        .iter()
        .map(|row| {
            let overall: Vec<f64> = row.scores.iter().map(|s| s.overall).collect();
            ranking_from_scores(&overall, &matrix.candidate_ids)
        })
        .collect()
}

/// Ranking by the per-candidate mean of overall scores across judges.
pub fn majority_ranking(matrix: &ScoreMatrix) -> Result<Ranking> {
    let means: Vec<f64> = (0..matrix.candidate_count())
        .map(|c| order_free_mean(matrix.rows.iter().map(|r| r.scores[c].overall)))
        .collect();
    ranking_from_scores(&means, &matrix.candidate_ids)
}

/// Agreement-file record: one line per candidate set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementRecord {
    pub candidate_set_id: String,
    pub pairwise_taus: Vec<NamedTau>,
    pub tau_avg: f64,
    pub route: Route,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTau {
    pub judge_a: String,
    pub judge_b: String,
    pub tau: f64,
    pub concordant: usize,
    pub discordant: usize,
}

impl AgreementRecord {
    pub fn new(candidate_set_id: &str, judges: &[String], report: &AgreementReport, decision: &RoutingDecision) -> Self {
        AgreementRecord {
            candidate_set_id: candidate_set_id.to_string(),
            pairwise_taus: report
                .pairs
                .iter()
                .map(|p| NamedTau {
                    judge_a: judges[p.i].clone(),
                    judge_b: judges[p.j].clone(),
                    tau: p.tau,
                    concordant: p.concordant,
                    discordant: p.discordant,
                })
                .collect(),
            tau_avg: report.tau_avg,
            route: decision.route,
        }
    }
}
