//! Line-delimited JSON files with an optional provenance header line.
//!
//! A header, when present, is the first line and has the single key
//! `__provenance`. It embeds the run configuration, its hash and a hash of
//! every byte after the header line.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::digest::sha256_hex;
use crate::error::{Error, Result};

pub const PROVENANCE_KEY: &str = "__provenance";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// What the file holds, e.g. `benchmark` or `training-pairs`.
    pub kind: String,
    pub config_hash: String,
    pub config: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body_hash: Option<String>,
}

impl Provenance {
    pub fn new<C: Serialize>(kind: impl Into<String>, config: &C) -> Result<Self> {
        let config = serde_json::to_value(config)
            .map_err(|e| Error::Config(format!("cannot serialize config: {e}")))?;
        Ok(Provenance {
            kind: kind.into(),
            config_hash: config_hash(&config),
            config,
            body_hash: None,
        })
    }
}

/// Hash of the canonical (sorted-key) JSON form of a config value.
pub fn config_hash(config: &serde_json::Value) -> String {
    // serde_json::Value maps are ordered by key, so this is canonical.
    sha256_hex(serde_json::to_string(config).expect("value serializes").as_bytes())
}

#[derive(Serialize, Deserialize)]
struct HeaderLine {
    #[serde(rename = "__provenance")]
    provenance: Provenance,
}

/// Buffers records and writes the file in one go on [`JsonlWriter::finish`],
/// so the header can carry the body hash.
pub struct JsonlWriter {
    path: PathBuf,
    header: Option<Provenance>,
    body: String,
    count: usize,
}

impl JsonlWriter {
    pub fn new(path: impl Into<PathBuf>, header: Option<Provenance>) -> Self {
        JsonlWriter {
            path: path.into(),
            header,
            body: String::new(),
            count: 0,
        }
    }

    pub fn push<T: Serialize>(&mut self, record: &T) -> Result<()> {
        let line = serde_json::to_string(record)
            .map_err(|e| Error::Invalid(format!("cannot serialize record: {e}")))?;
        self.body.push_str(&line);
        self.body.push('\n');
        self.count += 1;
        Ok(())
    }

    pub fn finish(self) -> Result<usize> {
        let mut out = String::new();
        if let Some(mut header) = self.header {
            header.body_hash = Some(sha256_hex(self.body.as_bytes()));
            let line = serde_json::to_string(&HeaderLine { provenance: header })
                .expect("header serializes");
            out.push_str(&line);
            out.push('\n');
        }
        out.push_str(&self.body);
        if let Some(parent) = self.path.parent() {
            if !parent.as_os_str().is_empty() {
                fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
        }
        fs::write(&self.path, out).map_err(|e| Error::io(&self.path, e))?;
        Ok(self.count)
    }
}

pub fn write_records<'a, T, I>(path: &Path, header: Option<Provenance>, records: I) -> Result<usize>
where
    T: Serialize + 'a,
    I: IntoIterator<Item = &'a T>,
{
    let mut w = JsonlWriter::new(path, header);
    for r in records {
        w.push(r)?;
    }
    w.finish()
}

#[derive(Debug)]
pub struct JsonlFile<T> {
    pub provenance: Option<Provenance>,
    /// `(1-based line number, record)` in file order.
    pub records: Vec<(usize, T)>,
}

impl<T> JsonlFile<T> {
    pub fn into_records(self) -> Vec<T> {
        self.records.into_iter().map(|(_, r)| r).collect()
    }
}

pub fn read_records<T: DeserializeOwned>(path: &Path) -> Result<JsonlFile<T>> {
    let raw = RawFile::read(path)?;
    let mut records = Vec::with_capacity(raw.lines.len());
    for (line_no, line) in raw.lines {
        let rec = serde_json::from_str(&line).map_err(|e| Error::Malformed {
            path: path.to_path_buf(),
            line: line_no,
            message: e.to_string(),
        })?;
        records.push((line_no, rec));
    }
    Ok(JsonlFile {
        provenance: raw.provenance,
        records,
    })
}

/// Unparsed view of a file: the header (if any), the exact body bytes and
/// its non-blank lines.
pub struct RawFile {
    pub provenance: Option<Provenance>,
    pub body: String,
    pub lines: Vec<(usize, String)>,
}

impl RawFile {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let (provenance, body, first_line) = match text.split_once('\n') {
            Some((first, rest)) if is_header(first) => (Some(parse_header(path, first)?), rest, 2),
            None if is_header(&text) => (Some(parse_header(path, &text)?), "", 2),
            _ => (None, text.as_str(), 1),
        };
        let lines = body
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| (i + first_line, l.to_string()))
            .collect();
        Ok(RawFile {
            provenance,
            body: body.to_string(),
            lines,
        })
    }
}

fn is_header(line: &str) -> bool {
    line.trim_start().starts_with(&format!("{{\"{PROVENANCE_KEY}\""))
}

fn parse_header(path: &Path, line: &str) -> Result<Provenance> {
    serde_json::from_str::<HeaderLine>(line)
        .map(|h| h.provenance)
        .map_err(|e| Error::Malformed {
            path: path.to_path_buf(),
            line: 1,
            message: format!("bad provenance header: {e}"),
        })
}

/// Outcome of re-checking a file's provenance header.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verification {
    Ok { kind: String, config_hash: String },
    NoHeader,
    ConfigHashMismatch { stored: String, computed: String },
    BodyHashMismatch { stored: String, computed: String },
    /// The embedded config differs from the one the caller expected.
    ConfigDiffers { stored: String, expected: String },
}

pub fn verify_file(path: &Path, expected_config_hash: Option<&str>) -> Result<Verification> {
    let raw = RawFile::read(path)?;
    let Some(p) = raw.provenance else {
        return Ok(Verification::NoHeader);
    };
    let computed = config_hash(&p.config);
    if computed != p.config_hash {
        return Ok(Verification::ConfigHashMismatch {
            stored: p.config_hash,
            computed,
        });
    }
    if let Some(stored) = p.body_hash {
        let computed = sha256_hex(raw.body.as_bytes());
        if computed != stored {
            return Ok(Verification::BodyHashMismatch { stored, computed });
        }
    }
    if let Some(expected) = expected_config_hash {
        if expected != p.config_hash {
            return Ok(Verification::ConfigDiffers {
                stored: p.config_hash,
                expected: expected.to_string(),
            });
        }
    }
    Ok(Verification::Ok {
        kind: p.kind,
        config_hash: p.config_hash,
    })
}
