//! Append-only completion cache.
//!
//! One JSON object per line with fields `key`, `polarity`, `text` and
//! `fingerprint`. The file is replayed on open; later lines replace earlier
//! ones with the same `(key, polarity, fingerprint)`. A lookup hits only when
//! an entry exists for the fingerprint of the prompt about to be sent, so a
//! changed prompt never reuses a stale completion.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::Polarity;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    pub polarity: Polarity,
    pub text: String,
    pub fingerprint: String,
}

#[derive(Debug, Default)]
pub struct ExplanationCache {
    entries: HashMap<(String, Polarity, String), CacheEntry>,
    path: Option<PathBuf>,
    writer: Option<BufWriter<File>>,
}

impl ExplanationCache {
    pub fn in_memory() -> Self {
        ExplanationCache::default()
    }

    /// Opens (creating if needed) a cache file and replays its lines. A torn
    /// final line from an interrupted run is dropped from the file with a
    /// warning.
    pub fn open(path: &Path) -> Result<Self> {
        let mut entries = HashMap::new();
        if path.exists() {
            let content = std::fs::read_to_string(path)?;
            let mut offset = 0usize;
            let mut torn_at = None;
            let lines: Vec<&str> = content.split_inclusive('\n').collect();
            let n = lines.len();
            for (idx, raw) in lines.into_iter().enumerate() {
                let start = offset;
                offset += raw.len();
                let line = raw.trim_end_matches(['\n', '\r']);
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<CacheEntry>(line) {
                    Ok(e) => {
                        entries.insert((e.key.clone(), e.polarity, e.fingerprint.clone()), e);
                    }
                    Err(err) if idx + 1 == n => {
                        tracing::warn!("dropping torn last line of {}: {err}", path.display());
                        torn_at = Some(start);
                    }
                    Err(err) => {
                        return Err(Error::Parse {
                            path: path.to_path_buf(),
                            line: idx + 1,
                            message: err.to_string(),
                        })
                    }
                }
            }
            if let Some(at) = torn_at {
                OpenOptions::new().write(true).open(path)?.set_len(at as u64)?;
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(ExplanationCache {
            entries,
            path: Some(path.to_path_buf()),
            writer: Some(BufWriter::new(file)),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, key: &str, polarity: Polarity, fingerprint: &str) -> Option<&str> {
        self.entries
            .get(&(key.to_string(), polarity, fingerprint.to_string()))
            .map(|e| e.text.as_str())
    }

    /// Records an entry, appending it to the backing file and flushing.
    pub fn insert(&mut self, entry: CacheEntry) -> Result<()> {
        if let Some(w) = self.writer.as_mut() {
            serde_json::to_writer(&mut *w, &entry)?;
            w.write_all(b"\n")?;
            w.flush()?;
        }
        self.entries
            .insert((entry.key.clone(), entry.polarity, entry.fingerprint.clone()), entry);
        Ok(())
    }

    pub fn entries(&self) -> impl Iterator<Item = &CacheEntry> {
        self.entries.values()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(key: &str, text: &str, fp: &str) -> CacheEntry {
        CacheEntry {
            key: key.into(),
            polarity: Polarity::Positive,
            text: text.into(),
            fingerprint: fp.into(),
        }
    }

    #[test]
    fn replay_last_writer_wins_and_fingerprint_gates_hits() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        {
            let mut c = ExplanationCache::open(&path).unwrap();
            c.insert(entry("u::i", "first", "f1")).unwrap();
            c.insert(entry("u::i", "second", "f1")).unwrap();
            c.insert(entry("u::i", "other", "f2")).unwrap();
        }
        let c = ExplanationCache::open(&path).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.get("u::i", Polarity::Positive, "f1"), Some("second"));
        assert_eq!(c.get("u::i", Polarity::Positive, "f2"), Some("other"));
        assert_eq!(c.get("u::i", Polarity::Positive, "f3"), None);
        assert_eq!(c.get("u::i", Polarity::Negative, "f2"), None);
    }

    #[test]
    fn torn_last_line_is_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        let good = serde_json::to_string(&entry("k", "t", "f")).unwrap();
        std::fs::write(&path, format!("{good}\n{{\"key\":\"k2\",\"pol")).unwrap();
        let mut c = ExplanationCache::open(&path).unwrap();
        assert_eq!(c.len(), 1);
        c.insert(entry("k3", "t3", "f3")).unwrap();
        drop(c);
        assert_eq!(ExplanationCache::open(&path).unwrap().len(), 2);

        std::fs::write(&path, format!("{{broken\n{good}\n")).unwrap();
        assert!(ExplanationCache::open(&path).is_err());
    }
}
