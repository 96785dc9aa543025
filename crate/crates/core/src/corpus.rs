//! Story corpora: the story-file schema, ingestion, filtering and length
//! statistics.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jsonl::{self, Provenance};

/// Who wrote a story.
///
/// Serialized as `"human"` or `"model:<name>"`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Source {
    Human,
    Model(String),
}

impl Source {
    pub fn is_human(&self) -> bool {
        matches!(self, Source::Human)
    }

    pub fn model(name: impl Into<String>) -> Self {
        Source::Model(name.into())
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Source::Human => f.write_str("human"),
            Source::Model(name) => write!(f, "model:{name}"),
        }
    }
}

impl FromStr for Source {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "human" => Ok(Source::Human),
            _ => match s.strip_prefix("model:") {
                Some(name) if !name.is_empty() => Ok(Source::Model(name.to_string())),
                _ => Err(format!("invalid source `{s}`, expected `human` or `model:<name>`")),
            },
        }
    }
}

impl Serialize for Source {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Source {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    #[default]
    En,
    Zh,
    Other,
}

/// Word count as used throughout the pipeline.
///
/// Unicode-whitespace tokens, except for Chinese where every
/// non-whitespace character counts as one word.
pub fn count_words(text: &str, language: Language) -> usize {
    match language {
        Language::Zh => text.chars().filter(|c| !c.is_whitespace()).count(),
        Language::En | Language::Other => text.split_whitespace().count(),
    }
}

/// Byte offset where word number `k` (0-based) starts, or `text.len()` if
/// the text has `k` words or fewer. Uses the same word notion as
/// [`count_words`].
pub fn word_boundary(text: &str, language: Language, k: usize) -> usize {
    match language {
        Language::Zh => text
            .char_indices()
            .filter(|(_, c)| !c.is_whitespace())
            .nth(k)
            .map_or(text.len(), |(i, _)| i),
        Language::En | Language::Other => {
            let mut seen = 0;
            let mut in_word = false;
            for (i, c) in text.char_indices() {
                if c.is_whitespace() {
                    in_word = false;
                } else if !in_word {
                    if seen == k {
                        return i;
                    }
                    seen += 1;
                    in_word = true;
                }
            }
            text.len()
        }
    }
}

/// One story. Text is stored exactly as ingested; `word_count` is always
/// derived from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StoryLine", into = "StoryLine")]
pub struct StoryRecord {
    pub id: String,
    pub premise_id: Option<String>,
    pub title: Option<String>,
    text: String,
    word_count: usize,
    pub source: Source,
    pub category: Option<String>,
    pub author_column: Option<String>,
    upvotes: Option<u64>,
    language: Language,
}

impl StoryRecord {
    pub fn new(id: impl Into<String>, text: impl Into<String>, source: Source, language: Language) -> Self {
        let text = text.into();
        StoryRecord {
            id: id.into(),
            premise_id: None,
            title: None,
            word_count: count_words(&text, language),
            text,
            source,
            category: None,
            author_column: None,
            upvotes: None,
            language,
        }
    }

    pub fn human(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self::new(id, text, Source::Human, Language::En)
    }

    pub fn with_premise_id(mut self, premise_id: impl Into<String>) -> Self {
        self.premise_id = Some(premise_id.into());
        self
    }

    pub fn with_title(mut self, title: impl Into<String>) -> Self {
        self.title = Some(title.into());
        self
    }

    pub fn with_category(mut self, category: impl Into<String>) -> Self {
        self.category = Some(category.into());
        self
    }

    pub fn with_author_column(mut self, column: impl Into<String>) -> Self {
        self.author_column = Some(column.into());
        self
    }

    /// Engagement counts only exist for human stories.
    pub fn with_upvotes(mut self, upvotes: u64) -> Result<Self> {
        if !self.source.is_human() {
            return Err(Error::Invalid(format!(
                "story `{}`: upvotes are only allowed on human stories",
                self.id
            )));
        }
        self.upvotes = Some(upvotes);
        Ok(self)
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn word_count(&self) -> usize {
        self.word_count
    }

    pub fn upvotes(&self) -> Option<u64> {
        self.upvotes
    }

    pub fn language(&self) -> Language {
        self.language
    }

    pub fn display_title(&self) -> &str {
        self.title.as_deref().unwrap_or(&self.id)
    }

    /// The first `words` words of the story, verbatim.
    pub fn excerpt(&self, words: usize) -> &str {
        self.text[..word_boundary(&self.text, self.language, words)].trim_end()
    }
}

/// Wire form of a story-file line.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StoryLine {
    id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    premise_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    title: Option<String>,
    text: String,
    /// Informational on output; ignored and recomputed on input.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    word_count: Option<usize>,
    source: Source,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    category: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    author_column: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    upvotes: Option<u64>,
    #[serde(default)]
    language: Language,
}

impl TryFrom<StoryLine> for StoryRecord {
    type Error = String;

    fn try_from(l: StoryLine) -> Result<Self, Self::Error> {
        if l.id.is_empty() {
            return Err("empty id".into());
        }
        if l.upvotes.is_some() && !l.source.is_human() {
            return Err(format!("story `{}`: upvotes present on a model-sourced story", l.id));
        }
        Ok(StoryRecord {
            word_count: count_words(&l.text, l.language),
            id: l.id,
            premise_id: l.premise_id,
            title: l.title,
            text: l.text,
            source: l.source,
            category: l.category,
            author_column: l.author_column,
            upvotes: l.upvotes,
            language: l.language,
        })
    }
}

impl From<StoryRecord> for StoryLine {
    fn from(r: StoryRecord) -> Self {
        StoryLine {
            id: r.id,
            premise_id: r.premise_id,
            title: r.title,
            text: r.text,
            word_count: Some(r.word_count),
            source: r.source,
            category: r.category,
            author_column: r.author_column,
            upvotes: r.upvotes,
            language: r.language,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    records: Vec<StoryRecord>,
    pub source_label: String,
}

impl Corpus {
    pub fn new(source_label: impl Into<String>, records: Vec<StoryRecord>) -> Result<Self> {
        let mut seen = HashSet::new();
        for r in &records {
            if !seen.insert(r.id.as_str()) {
                return Err(Error::Invalid(format!("duplicate story id `{}`", r.id)));
            }
        }
        Ok(Corpus {
            records,
            source_label: source_label.into(),
        })
    }

    pub fn empty(source_label: impl Into<String>) -> Self {
        Corpus {
            records: Vec::new(),
            source_label: source_label.into(),
        }
    }

    pub fn records(&self) -> &[StoryRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<StoryRecord> {
        self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&StoryRecord> {
        self.records.iter().find(|r| r.id == id)
    }
}

/// Reads a story file. Every line must validate; the first bad line aborts
/// the load with its line number.
pub fn ingest_stories(path: &Path, source_label: &str) -> Result<Corpus> {
    let file = jsonl::read_records::<StoryRecord>(path)?;
    let mut seen = HashSet::new();
    let mut records = Vec::with_capacity(file.records.len());
    for (line, rec) in file.records {
        if !seen.insert(rec.id.clone()) {
            return Err(Error::DuplicateId {
                path: path.to_path_buf(),
                line,
                id: rec.id,
            });
        }
        records.push(rec);
    }
    Ok(Corpus {
        records,
        source_label: source_label.to_string(),
    })
}

pub fn write_stories(corpus: &Corpus, path: &Path, header: Option<Provenance>) -> Result<usize> {
    jsonl::write_records(path, header, corpus.records())
}

pub fn filter_min_words(corpus: &Corpus, min_words: usize) -> Corpus {
    Corpus {
        records: corpus
            .records
            .iter()
            .filter(|r| r.word_count >= min_words)
            .cloned()
            .collect(),
        source_label: corpus.source_label.clone(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub instance_count: usize,
    pub average_length_words: f64,
    pub median_length_words: f64,
}

impl DatasetStats {
    pub fn from_lengths(lengths: &[usize]) -> Result<Self> {
        if lengths.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut sorted = lengths.to_vec();
        sorted.sort_unstable();
        let n = sorted.len();
        let total: u128 = sorted.iter().map(|&l| l as u128).sum();
        let median = if n % 2 == 1 {
            sorted[n / 2] as f64
        } else {
            (sorted[n / 2 - 1] as f64 + sorted[n / 2] as f64) / 2.0
        };
        Ok(DatasetStats {
            instance_count: n,
            average_length_words: total as f64 / n as f64,
            median_length_words: median,
        })
    }
}

impl fmt::Display for DatasetStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "count {}  avg {}  median {}",
            self.instance_count,
            trim_float(self.average_length_words),
            trim_float(self.median_length_words)
        )
    }
}

fn trim_float(x: f64) -> String {
    if x.fract() == 0.0 {
        format!("{x:.0}")
    } else {
        format!("{x:.2}")
    }
}

pub fn dataset_stats(corpus: &Corpus) -> Result<DatasetStats> {
    let lengths: Vec<usize> = corpus.records.iter().map(|r| r.word_count).collect();
    DatasetStats::from_lengths(&lengths)
}

/// A story premise, as listed in a premise file (`{id, text}` per line).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Premise {
    pub id: String,
    pub text: String,
}

impl Premise {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Premise {
            id: id.into(),
            text: text.into(),
        }
    }
}

pub fn read_premises(path: &Path) -> Result<Vec<Premise>> {
    let file = jsonl::read_records::<Premise>(path)?;
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(file.records.len());
    for (line, p) in file.records {
        if p.text.trim().is_empty() {
            return Err(Error::Malformed {
                path: path.to_path_buf(),
                line,
                message: format!("premise `{}` has empty text", p.id),
            });
        }
        if !seen.insert(p.id.clone()) {
            return Err(Error::DuplicateId {
                path: path.to_path_buf(),
                line,
                id: p.id,
            });
        }
        out.push(p);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::fs;

    fn words(n: usize) -> String {
        vec!["w"; n].join(" ")
    }

    fn corpus_of(lengths: &[usize]) -> Corpus {
        let records = lengths
            .iter()
            .enumerate()
            .map(|(i, &n)| StoryRecord::human(format!("s{i}"), words(n)))
            .collect();
        Corpus::new("t", records).unwrap()
    }

    #[test]
    fn ingest_three_valid_lines() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.jsonl");
        fs::write(
            &p,
            concat!(
                r#"{"id":"a","text":"one two","source":"human","upvotes":3,"language":"en"}"#, "\n",
                r#"{"id":"b","text":"x","source":"model:gpt","language":"en"}"#, "\n",
                r#"{"id":"c","text":"甲乙 丙","source":"human","language":"zh","category":"scifi"}"#, "\n",
            ),
        )
        .unwrap();
        let c = ingest_stories(&p, "fixture").unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.records()[0].upvotes(), Some(3));
        assert_eq!(c.records()[1].source, Source::model("gpt"));
        assert_eq!(c.records()[2].word_count(), 3);
        assert_eq!(c.source_label, "fixture");
    }

    #[test]
    fn missing_text_names_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.jsonl");
        fs::write(
            &p,
            "{\"id\":\"a\",\"text\":\"t\",\"source\":\"human\",\"language\":\"en\"}\n{\"id\":\"b\",\"source\":\"human\",\"language\":\"en\"}\n",
        )
        .unwrap();
        let err = ingest_stories(&p, "x").unwrap_err();
        match err {
            Error::Malformed { line, message, .. } => {
                assert_eq!(line, 2);
                assert!(message.contains("text"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn stored_word_count_is_ignored() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.jsonl");
        fs::write(
            &p,
            "{\"id\":\"a\",\"text\":\"a b  c\",\"word_count\":17,\"source\":\"human\",\"language\":\"en\"}\n",
        )
        .unwrap();
        let c = ingest_stories(&p, "x").unwrap();
        assert_eq!(c.records()[0].word_count(), 3);
    }

    #[test]
    fn duplicate_ids_and_bad_upvotes_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("dup.jsonl");
        let line = "{\"id\":\"a\",\"text\":\"t\",\"source\":\"human\"}\n";
        fs::write(&p, format!("{line}{line}")).unwrap();
        assert!(matches!(ingest_stories(&p, "x"), Err(Error::DuplicateId { line: 2, .. })));

        fs::write(&p, "{\"id\":\"a\",\"text\":\"t\",\"source\":\"model:m\",\"upvotes\":4}\n").unwrap();
        assert!(matches!(ingest_stories(&p, "x"), Err(Error::Malformed { line: 1, .. })));
        assert!(StoryRecord::new("m", "t", Source::model("m"), Language::En)
            .with_upvotes(1)
            .is_err());
    }

    #[test]
    fn unreadable_file() {
        assert!(matches!(
            ingest_stories(Path::new("/nonexistent/stories.jsonl"), "x"),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn min_words_filter() {
        let c = corpus_of(&[99, 100]);
        let f = filter_min_words(&c, 100);
        assert_eq!(f.len(), 1);
        assert_eq!(f.records()[0].word_count(), 100);
        assert_eq!(filter_min_words(&c, 0), c);
        assert!(filter_min_words(&Corpus::empty("e"), 100).is_empty());
    }

    #[test]
    fn stats_examples() {
        let s = dataset_stats(&corpus_of(&[100, 200, 600])).unwrap();
        assert_eq!((s.instance_count, s.average_length_words, s.median_length_words), (3, 300.0, 200.0));
        assert_eq!(dataset_stats(&corpus_of(&[100, 300])).unwrap().median_length_words, 200.0);
        let one = dataset_stats(&corpus_of(&[50])).unwrap();
        assert_eq!((one.average_length_words, one.median_length_words), (50.0, 50.0));
        assert!(matches!(dataset_stats(&Corpus::empty("e")), Err(Error::EmptyCorpus)));
    }

    #[test]
    fn word_boundaries() {
        let t = "  alpha beta\tgamma ";
        assert_eq!(&t[word_boundary(t, Language::En, 1)..], "beta\tgamma ");
        assert_eq!(word_boundary(t, Language::En, 3), t.len());
        let z = "甲 乙丙";
        assert_eq!(&z[word_boundary(z, Language::Zh, 2)..], "丙");
        let s = StoryRecord::human("x", "one two three four");
        assert_eq!(s.excerpt(2), "one two");
    }

    #[test]
    fn source_parsing() {
        assert_eq!("human".parse::<Source>().unwrap(), Source::Human);
        assert_eq!("model:a:b".parse::<Source>().unwrap(), Source::model("a:b"));
        assert!("model:".parse::<Source>().is_err());
        assert!("robot".parse::<Source>().is_err());
    }

    fn arb_story(i: usize) -> impl Strategy<Value = StoryRecord> {
        (
            "[a-z \\t\\n\u{3000}é.!]{0,40}",
            prop::option::of("[a-z]{1,4}"),
            prop::option::of(0u64..1000),
            prop::bool::ANY,
        )
            .prop_map(move |(text, cat, up, zh)| {
                let lang = if zh { Language::Zh } else { Language::En };
                let mut s = StoryRecord::new(format!("id{i}"), text, Source::Human, lang);
                if let Some(c) = cat {
                    s = s.with_category(c);
                }
                match up {
                    Some(u) => s.with_upvotes(u).unwrap(),
                    None => s,
                }
            })
    }

    proptest! {
        #[test]
        fn ingest_serialize_round_trip(stories in (0usize..6).prop_flat_map(|n| (0..n).map(arb_story).collect::<Vec<_>>())) {
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("rt.jsonl");
            let c = Corpus::new("rt", stories).unwrap();
            write_stories(&c, &p, None).unwrap();
            let back = ingest_stories(&p, "rt").unwrap();
            prop_assert_eq!(back, c);
        }

        #[test]
        fn filter_idempotent_and_monotone(lengths in prop::collection::vec(0usize..300, 0..20), a in 0usize..300, b in 0usize..300) {
            let c = corpus_of(&lengths);
            let once = filter_min_words(&c, a);
            prop_assert_eq!(filter_min_words(&once, a), once.clone());
            let (lo, hi) = (a.min(b), a.max(b));
            prop_assert!(filter_min_words(&c, hi).len() <= filter_min_words(&c, lo).len());
        }

        #[test]
        fn stats_match_brute_force(lengths in prop::collection::vec(0usize..5000, 1..40)) {
            let s = DatasetStats::from_lengths(&lengths).unwrap();
            let mean = lengths.iter().sum::<usize>() as f64 / lengths.len() as f64;
            // Median by counting: the value(s) with half the mass on each side.
            let mut below_or_eq = Vec::new();
            for &x in &lengths {
                let le = lengths.iter().filter(|&&y| y <= x).count();
                let ge = lengths.iter().filter(|&&y| y >= x).count();
                if 2 * le >= lengths.len() && 2 * ge >= lengths.len() {
                    below_or_eq.push(x);
                }
            }
            let lo = *below_or_eq.iter().min().unwrap() as f64;
            let hi = *below_or_eq.iter().max().unwrap() as f64;
            let median = if lengths.len() % 2 == 1 { lo } else { (lo + hi) / 2.0 };
            prop_assert_eq!(s.instance_count, lengths.len());
            prop_assert_eq!(s.average_length_words, mean);
            prop_assert_eq!(s.median_length_words, median);
            let min = *lengths.iter().min().unwrap() as f64;
            let max = *lengths.iter().max().unwrap() as f64;
            prop_assert!(min <= s.median_length_words && s.median_length_words <= max);
        }
    }
}
