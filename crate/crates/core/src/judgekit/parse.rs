//! Lenient extraction of a score block from free-form judge output.

use serde::Deserialize;

use crate::dimension::DimensionScores;

#[derive(Deserialize)]
struct Block {
    creativity: f64,
    coherence: f64,
    fluency: f64,
    characterization: f64,
    relevance: f64,
    overall: f64,
}

/// Finds the last `{...}` object in `reply` that carries all six scores,
/// then range-checks it. Earlier blocks and surrounding prose are ignored.
pub fn extract_scores(reply: &str) -> Result<DimensionScores, String> {
    let mut last: Option<Block> = None;
    for (start, _) in reply.match_indices('{') {
        if let Some(end) = matching_brace(&reply[start..]) {
            if let Ok(b) = serde_json::from_str::<Block>(&reply[start..start + end + 1]) {
                last = Some(b);
            }
        }
    }
    let b = last.ok_or_else(|| "no well-formed score block in reply".to_string())?;
    DimensionScores::new(
        [b.creativity, b.coherence, b.fluency, b.characterization, b.relevance],
        b.overall,
    )
    .map_err(|e| e.to_string())
}

fn matching_brace(s: &str) -> Option<usize> {
    let mut depth = 0usize;
    let mut in_str = false;
    let mut escaped = false;
    for (i, c) in s.char_indices() {
        if in_str {
            match c {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                '"' => in_str = false,
                _ => {}
            }
            continue;
        }
        match c {
            '"' => in_str = true,
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i);
                }
            }
            _ => {}
        }
    }
    None
}
