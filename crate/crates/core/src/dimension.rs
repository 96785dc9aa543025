use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SCORE_MIN: f64 = 0.0;
pub const SCORE_MAX: f64 = 10.0;

/// The five story-quality dimensions, in their canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dimension {
    Creativity,
    Coherence,
    Fluency,
    Characterization,
    Relevance,
}

impl Dimension {
    pub const ALL: [Dimension; 5] = [
        Dimension::Creativity,
        Dimension::Coherence,
        Dimension::Fluency,
        Dimension::Characterization,
        Dimension::Relevance,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Dimension::Creativity => "creativity",
            Dimension::Coherence => "coherence",
            Dimension::Fluency => "fluency",
            Dimension::Characterization => "characterization",
            Dimension::Relevance => "relevance",
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Dimension {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Dimension::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown dimension `{s}`")))
    }
}

/// One judge's scores for one story: five dimensions plus an overall score,
/// all on the closed 0..=10 scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawScores")]
pub struct DimensionScores {
    pub creativity: f64,
    pub coherence: f64,
    pub fluency: f64,
    pub characterization: f64,
    pub relevance: f64,
    pub overall: f64,
}

#[derive(Deserialize)]
struct RawScores {
    creativity: f64,
    coherence: f64,
    fluency: f64,
    characterization: f64,
    relevance: f64,
    overall: f64,
}

impl TryFrom<RawScores> for DimensionScores {
    type Error = Error;

    fn try_from(r: RawScores) -> Result<Self> {
        DimensionScores::new(
            [r.creativity, r.coherence, r.fluency, r.characterization, r.relevance],
            r.overall,
        )
    }
}

impl DimensionScores {
    pub fn new(dims: [f64; 5], overall: f64) -> Result<Self> {
        for (name, v) in Dimension::ALL
            .iter()
            .map(|d| d.as_str())
            .zip(dims)
            .chain(std::iter::once(("overall", overall)))
        {
            if !(SCORE_MIN..=SCORE_MAX).contains(&v) {
                return Err(Error::Invalid(format!(
                    "{name} score {v} outside [{SCORE_MIN}, {SCORE_MAX}]"
                )));
            }
        }
        let [creativity, coherence, fluency, characterization, relevance] = dims;
        Ok(DimensionScores {
            creativity,
            coherence,
            fluency,
            characterization,
            relevance,
            overall,
        })
    }

    pub fn uniform(v: f64) -> Result<Self> {
        Self::new([v; 5], v)
    }

    pub fn get(&self, d: Dimension) -> f64 {
        self.dims()[d.index()]
    }

    pub fn dims(&self) -> [f64; 5] {
        [
            self.creativity,
            self.coherence,
            self.fluency,
            self.characterization,
            self.relevance,
        ]
    }

    /// Element-wise mean. Values are summed in sorted order so the result
    /// does not depend on the order of `rows`.
    pub fn mean(rows: &[DimensionScores]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Invalid("mean of zero score rows".into()));
        }
        let col = |f: &dyn Fn(&DimensionScores) -> f64| order_free_mean(rows.iter().map(f));
        let dims = Dimension::ALL.map(|d| col(&|s: &DimensionScores| s.get(d)));
        Self::new(dims, col(&|s: &DimensionScores| s.overall))
    }
}

/// Arithmetic mean computed over the sorted values.
pub fn order_free_mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.into_iter().collect();
    v.sort_by(f64::total_cmp);
    v.iter().sum::<f64>() / v.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_enforced() {
        assert!(DimensionScores::new([5.0; 5], 11.0).is_err());
        assert!(DimensionScores::new([5.0, -0.1, 5.0, 5.0, 5.0], 5.0).is_err());
        assert!(DimensionScores::new([0.0, 10.0, 5.0, 5.0, 5.0], 10.0).is_ok());
        let bad = r#"{"creativity":1,"coherence":1,"fluency":1,"characterization":1,"relevance":1,"overall":12}"#;
        assert!(serde_json::from_str::<DimensionScores>(bad).is_err());
    }

    #[test]
    fn dimension_names_round_trip() {
        for d in Dimension::ALL {
            assert_eq!(d.as_str().parse::<Dimension>().unwrap(), d);
            assert_eq!(serde_json::to_string(&d).unwrap(), format!("\"{d}\""));
        }
    }

    #[test]
    fn mean_is_order_free() {
        let a = DimensionScores::new([0.1, 0.2, 0.3, 9.9, 1.0], 0.7).unwrap();
        let b = DimensionScores::new([0.7, 3.3, 0.1, 0.2, 2.0], 0.1).unwrap();
        let c = DimensionScores::new([0.2, 0.1, 9.7, 0.3, 3.0], 0.2).unwrap();
        assert_eq!(
            DimensionScores::mean(&[a, b, c]).unwrap(),
            DimensionScores::mean(&[c, a, b]).unwrap()
        );
    }
}
