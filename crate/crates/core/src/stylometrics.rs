//! Sentence-length burstiness: population excess kurtosis of per-sentence
//! word counts.

use serde::{Deserialize, Serialize};

use crate::corpus::{count_words, Language, StoryRecord};
use crate::error::{Error, Result};

fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '!' | '?' | '。' | '！' | '？')
}

/// Splits on runs of `. ! ? 。 ！ ？`, keeping the run with its sentence.
/// Trailing text without a terminator is a final sentence; pieces with no
/// content besides whitespace and terminators are dropped.
pub fn split_sentences(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if !is_terminator(c) {
            continue;
        }
        let mut end = i + c.len_utf8();
        while let Some(&(j, d)) = chars.peek() {
            if !is_terminator(d) {
                break;
            }
            end = j + d.len_utf8();
            chars.next();
        }
        push_sentence(&mut out, &text[start..end]);
        start = end;
    }
    push_sentence(&mut out, &text[start..]);
    out
}

fn push_sentence<'a>(out: &mut Vec<&'a str>, piece: &'a str) {
    let trimmed = piece.trim();
    if trimmed.chars().any(|c| !is_terminator(c) && !c.is_whitespace()) {
        out.push(trimmed);
    }
}

pub fn sentence_lengths(text: &str, language: Language) -> Vec<usize> {
    split_sentences(text)
        .into_iter()
        .map(|s| count_words(s, language))
        .collect()
}

/// Population excess kurtosis `m4 / m2^2 - 3`. Needs two values and
/// non-zero variance.
pub fn kurtosis(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::TooFewValues {
            needed: 2,
            got: values.len(),
        });
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let (mut m2, mut m4) = (0.0, 0.0);
    for v in values {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m4 += d2 * d2;
    }
    m2 /= n;
    m4 /= n;
    if m2 == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok(m4 / (m2 * m2) - 3.0)
}

pub fn text_kurtosis(text: &str, language: Language) -> Result<f64> {
    Ok(burstiness(text, language)?.kurtosis)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BurstinessReport {
    pub sentence_lengths: Vec<usize>,
    pub mu: f64,
    /// Population standard deviation.
    pub sigma: f64,
    pub kurtosis: f64,
}

pub fn burstiness(text: &str, language: Language) -> Result<BurstinessReport> {
    let sentence_lengths = sentence_lengths(text, language);
    let values: Vec<f64> = sentence_lengths.iter().map(|&l| l as f64).collect();
    let kurtosis = kurtosis(&values)?;
    let n = values.len() as f64;
    let mu = values.iter().sum::<f64>() / n;
    let sigma = (values.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n).sqrt();
    Ok(BurstinessReport {
        sentence_lengths,
        mu,
        sigma,
        kurtosis,
    })
}

/// Per-story line of the batch output; `kurtosis` is absent when undefined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoryKurtosis {
    pub story_id: String,
    pub sentences: usize,
    pub kurtosis: Option<f64>,
}

pub fn story_kurtosis(story: &StoryRecord) -> StoryKurtosis {
    let lengths = sentence_lengths(story.text(), story.language());
    StoryKurtosis {
        story_id: story.id.clone(),
        sentences: lengths.len(),
        kurtosis: burstiness(story.text(), story.language()).ok().map(|b| b.kurtosis),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KurtosisRow {
    pub source: String,
    pub stories: usize,
    /// Stories skipped for too few sentences or uniform sentence lengths.
    pub skipped: usize,
    pub mean_kurtosis: f64,
    /// `(mean - reference) / |reference|`; absent for the reference itself.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relative_difference: Option<f64>,
}

/// Mean per-story kurtosis for one corpus. Stories whose kurtosis is
/// undefined are counted as skipped.
pub fn corpus_kurtosis(source: &str, stories: &[StoryRecord]) -> Result<KurtosisRow> {
    let mut values = Vec::new();
    let mut skipped = 0;
    for s in stories {
        match text_kurtosis(s.text(), s.language()) {
            Ok(k) => values.push(k),
            Err(Error::ZeroVariance | Error::TooFewValues { .. }) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    if values.is_empty() {
        return Err(Error::Invalid(format!("no story in `{source}` has a defined kurtosis")));
    }
    Ok(KurtosisRow {
        source: source.to_string(),
        stories: values.len(),
        skipped,
        mean_kurtosis: values.iter().sum::<f64>() / values.len() as f64,
        relative_difference: None,
    })
}

/// Fills each row's relative difference against the row named `reference`.
pub fn with_relative_differences(mut rows: Vec<KurtosisRow>, reference: &str) -> Result<Vec<KurtosisRow>> {
    let base = rows
        .iter()
        .find(|r| r.source == reference)
        .map(|r| r.mean_kurtosis)
        .ok_or_else(|| Error::Invalid(format!("no kurtosis row for reference `{reference}`")))?;
    for r in &mut rows {
        if r.source != reference {
            r.relative_difference = (base != 0.0).then(|| (r.mean_kurtosis - base) / base.abs());
        }
    }
    Ok(rows)
}

pub fn kurtosis_table(rows: &[KurtosisRow]) -> String {
    let mut out = format!("{:<24} {:>8} {:>8} {:>10} {:>10}\n", "source", "stories", "skipped", "kurtosis", "rel.diff");
    for r in rows {
        let rel = r
            .relative_difference
            .map(|d| format!("{:+.1}%", 100.0 * d))
            .unwrap_or_else(|| "-".into());
        out.push_str(&format!(
            "{:<24} {:>8} {:>8} {:>10.4} {:>10}\n",
            r.source, r.stories, r.skipped, r.mean_kurtosis, rel
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;
    use num_traits::{ToPrimitive, Zero};
    use proptest::prelude::*;

    fn exact_kurtosis(values: &[i64]) -> f64 {
        let n = BigRational::from_integer(values.len().into());
        let vals: Vec<BigRational> = values.iter().map(|&v| BigRational::from_integer(v.into())).collect();
        let mean = vals.iter().fold(BigRational::zero(), |a, v| a + v) / &n;
        let pow = |k: u32| {
            vals.iter().fold(BigRational::zero(), |a, v| {
                let d = v - &mean;
                let mut p = BigRational::from_integer(1.into());
                for _ in 0..k {
                    p *= &d;
                }
                a + p
            }) / &n
        };
        let (m2, m4) = (pow(2), pow(4));
        (m4 / (&m2 * &m2)).to_f64().unwrap() - 3.0
    }

    #[test]
    fn splitting() {
        assert_eq!(split_sentences("One two. Three!"), vec!["One two.", "Three!"]);
        assert_eq!(split_sentences("Wait?! Really... yes"), vec!["Wait?!", "Really...", "yes"]);
        assert_eq!(split_sentences("  . ! ?  "), Vec::<&str>::new());
        assert_eq!(split_sentences("你好。再见！"), vec!["你好。", "再见！"]);
        assert!(split_sentences("").is_empty());
        assert_eq!(split_sentences("A b. C d e!").len(), 2);
        assert_eq!(split_sentences("No terminator here"), vec!["No terminator here"]);
        assert_eq!(split_sentences("Hi! ! !"), vec!["Hi!"]);
    }

    #[test]
    fn kurtosis_examples() {
        let k = kurtosis(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert!((k + 1.3).abs() < 1e-12);
        assert!(matches!(kurtosis(&[3.0, 3.0, 3.0]), Err(Error::ZeroVariance)));
        assert!(matches!(kurtosis(&[3.0]), Err(Error::TooFewValues { .. })));
        assert!(matches!(kurtosis(&[5.0; 4]), Err(Error::ZeroVariance)));
        let b = burstiness("a. a b. a b c. a b c d. a b c d e.", Language::En).unwrap();
        assert_eq!(b.sentence_lengths, vec![1, 2, 3, 4, 5]);
        assert_eq!(b.mu, 3.0);
        assert!((b.sigma * b.sigma - 2.0).abs() < 1e-12);
        let t = text_kurtosis("a. a b. a b c. a b c d. a b c d e.", Language::En).unwrap();
        assert!((t + 1.3).abs() < 1e-12);
    }

    #[test]
    fn relative_differences() {
        let row = |s: &str, k| KurtosisRow {
            source: s.into(),
            stories: 1,
            skipped: 0,
            mean_kurtosis: k,
            relative_difference: None,
        };
        let rows = with_relative_differences(vec![row("human", 2.0), row("llm", 1.0)], "human").unwrap();
        assert_eq!(rows[0].relative_difference, None);
        assert_eq!(rows[1].relative_difference, Some(-0.5));
        assert!(kurtosis_table(&rows).contains("-50.0%"));
        assert!(with_relative_differences(rows, "nobody").is_err());
    }

    proptest! {
        #[test]
        fn matches_exact_oracle(values in prop::collection::vec(-50i64..50, 2..40)) {
            prop_assume!(values.iter().any(|&v| v != values[0]));
            let floats: Vec<f64> = values.iter().map(|&v| v as f64).collect();
            let got = kurtosis(&floats).unwrap();
            let want = exact_kurtosis(&values);
            prop_assert!((got - want).abs() <= 1e-9 * want.abs().max(1.0));
        }

        #[test]
        fn split_idempotent_on_joined(text in "[a-c .!?。\\n]{0,60}") {
            let once = split_sentences(&text);
            let joined = once.join(" ");
            prop_assert_eq!(split_sentences(&joined), once);
        }

        #[test]
        fn affine_invariant(values in prop::collection::vec(0i64..30, 3..30), a in 0.5f64..4.0, b in -10.0f64..10.0) {
            prop_assume!(values.iter().any(|&v| v != values[0]));
            let floats: Vec<f64> = values.iter().map(|&v| v as f64).collect();
            let moved: Vec<f64> = floats.iter().map(|v| a * v + b).collect();
            let (k1, k2) = (kurtosis(&floats).unwrap(), kurtosis(&moved).unwrap());
            prop_assert!((k1 - k2).abs() < 1e-6);
            prop_assert!(k1 >= -2.0 - 1e-9);
        }
    }
}
