//! Bundled prompt templates, addressed by template id.
//!
//! Templates use `{name}` placeholders. Braces around anything that is not
//! a bare identifier (JSON examples, for instance) are left as they are.
//! Lines starting with `##` are asset header comments and are not part of
//! the prompt.

use crate::error::{Error, Result};

macro_rules! assets {
    ($($id:literal),* $(,)?) => {
        &[$(($id, include_str!(concat!("../../assets/prompts/", $id, ".txt")))),*]
    };
}

static ASSETS: &[(&str, &str)] = assets![
    "story.literary",
    "story.humanlike",
    "score.five_dimension",
    "premise.backgen",
    "continuation.guided",
    "continuation.unguided_title",
    "continuation.unguided_premise",
    "rewrite.beginning_motivation",
    "rewrite.beginning_tone",
    "rewrite.middle_motivation",
    "rewrite.middle_tone",
    "rewrite.ending_motivation",
    "rewrite.ending_tone",
    "rewrite.emotional_tone",
    "rewrite.final_scene",
    "rewrite.literary_style",
    "rewrite.inner_conflict",
];

pub const SCORE_TEMPLATE: &str = "score.five_dimension";
pub const BACKGEN_TEMPLATE: &str = "premise.backgen";
pub const GUIDED_TEMPLATE: &str = "continuation.guided";
pub const UNGUIDED_PREMISE_TEMPLATE: &str = "continuation.unguided_premise";
pub const UNGUIDED_TITLE_TEMPLATE: &str = "continuation.unguided_title";
pub const DEFAULT_STORY_TEMPLATE: &str = "story.literary";

pub fn template_ids() -> impl Iterator<Item = &'static str> {
    ASSETS.iter().map(|(id, _)| *id)
}

pub fn rewrite_template_ids() -> Vec<&'static str> {
    template_ids().filter(|id| id.starts_with("rewrite.")).collect()
}

/// The raw asset text, header included.
pub fn asset(id: &str) -> Result<&'static str> {
    ASSETS
        .iter()
        .find(|(name, _)| *name == id)
        .map(|(_, body)| *body)
        .ok_or_else(|| Error::UnknownTemplate(id.to_string()))
}

/// The prompt body: the asset minus its `##` header lines and trailing
/// newline.
pub fn template(id: &str) -> Result<String> {
    let body: Vec<&str> = asset(id)?
        .lines()
        .skip_while(|l| l.starts_with("##"))
        .collect();
    Ok(body.join("\n"))
}

/// Names of the placeholders a template expects, in order of first use.
pub fn placeholders(id: &str) -> Result<Vec<String>> {
    let t = template(id)?;
    let mut out: Vec<String> = Vec::new();
    for (_, name) in scan(&t) {
        if !out.iter().any(|n| n == name) {
            out.push(name.to_string());
        }
    }
    Ok(out)
}

pub fn render(id: &str, vars: &[(&str, &str)]) -> Result<String> {
    let t = template(id)?;
    let mut out = String::with_capacity(t.len() + vars.iter().map(|(_, v)| v.len()).sum::<usize>());
    let mut last = 0;
    for (start, name) in scan(&t) {
        let value = vars
            .iter()
            .find(|(k, _)| *k == name)
            .map(|(_, v)| *v)
            .ok_or_else(|| Error::MissingPlaceholder {
                template: id.to_string(),
                placeholder: name.to_string(),
            })?;
        out.push_str(&t[last..start]);
        out.push_str(value);
        last = start + name.len() + 2;
    }
    out.push_str(&t[last..]);
    Ok(out)
}

/// `(byte offset of '{', placeholder name)` for every `{identifier}`.
fn scan(t: &str) -> Vec<(usize, &str)> {
    let mut found = Vec::new();
    let bytes = t.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'{' {
            let rest = &t[i + 1..];
            if let Some(end) = rest.find('}') {
                let name = &rest[..end];
                if !name.is_empty() && name.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_') {
                    found.push((i, name));
                    i += end + 2;
                    continue;
                }
            }
        }
        i += 1;
    }
    found
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_asset_has_a_body_and_header() {
        for id in template_ids() {
            let raw = asset(id).unwrap();
            assert!(raw.starts_with("##"), "{id} lacks a header");
            assert!(!template(id).unwrap().trim().is_empty(), "{id} is empty");
        }
        assert_eq!(rewrite_template_ids().len(), 10);
    }

    #[test]
    fn render_fills_placeholders() {
        let p = render(BACKGEN_TEMPLATE, &[("title_a", "A"), ("abstract_a", "aa"), ("title_b", "B"), ("abstract_b", "bb")]).unwrap();
        assert!(p.starts_with("Below are two articles."));
        assert!(p.contains("Article A:A\naa\nArticle B:B\nbb\n"));
        assert!(!p.contains('{'));
    }

    #[test]
    fn render_keeps_json_braces() {
        let p = render(SCORE_TEMPLATE, &[("premise", "P"), ("story", "S")]).unwrap();
        assert!(p.contains("{\"creativity\": <0-10>"));
        assert!(p.contains("Premise: P"));
        assert_eq!(placeholders(SCORE_TEMPLATE).unwrap(), vec!["premise", "story"]);
    }

    #[test]
    fn missing_values_and_unknown_ids() {
        assert!(matches!(
            render(GUIDED_TEMPLATE, &[("title", "t")]),
            Err(Error::MissingPlaceholder { placeholder, .. }) if placeholder == "beginning"
        ));
        assert!(matches!(template("story.nope"), Err(Error::UnknownTemplate(_))));
    }

    #[test]
    fn values_are_not_rescanned() {
        let p = render(UNGUIDED_TITLE_TEMPLATE, &[("title", "{title}")]).unwrap();
        assert!(p.contains("Title: {title}"));
    }
}
