//! Content-addressed response cache keyed by `(backend, prompt hash)`.
//!
//! Safe for concurrent use. With a directory attached, entries are also
//! persisted one file per key, written via rename, so reruns are free.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::RwLock;

use crate::digest::{sha256_hex, sha256_parts_hex};
use crate::error::{Error, Result};

#[derive(Debug, Default)]
pub struct ResponseCache {
    entries: RwLock<HashMap<String, String>>,
    dir: Option<PathBuf>,
}

impl ResponseCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn persistent(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(ResponseCache {
            entries: RwLock::default(),
            dir: Some(dir),
        })
    }

    pub fn key(backend: &str, prompt: &str) -> String {
        sha256_parts_hex(&[backend, &sha256_hex(prompt.as_bytes())])
    }

    pub fn get(&self, key: &str) -> Option<String> {
        if let Some(v) = self.entries.read().unwrap().get(key) {
            return Some(v.clone());
        }
        let path = self.path_for(key)?;
        let v = fs::read_to_string(path).ok()?;
        self.entries
            .write()
            .unwrap()
            .insert(key.to_string(), v.clone());
        Some(v)
    }

    pub fn put(&self, key: &str, value: &str) -> Result<()> {
        if let Some(path) = self.path_for(key) {
            write_atomic(&path, value)?;
        }
        self.entries
            .write()
            .unwrap()
            .insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn path_for(&self, key: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{key}.txt")))
    }
}

fn write_atomic(path: &Path, value: &str) -> Result<()> {
    let tmp = path.with_extension(format!("tmp.{:?}", std::thread::current().id()).replace(['(', ')'], ""));
    fs::write(&tmp, value).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
