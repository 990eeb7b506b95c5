//! Content-addressed transcript store for record/replay backends.
//!
//! Each entry is one JSON file named `<request key>.json` holding the request
//! and its completions. Writes are atomic (temp file + rename) and the store
//! is append-only: recording never overwrites an existing entry, so replaying
//! a recorded experiment is bit-reproducible.

use super::{Completion, Gateway, GatewayError, GenerationRequest};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub key: String,
    pub request: GenerationRequest,
    pub completions: Vec<Completion>,
}

#[derive(Debug, Clone)]
pub struct TranscriptStore {
    dir: PathBuf,
}

impl TranscriptStore {
    /// Open (creating if needed) a transcript directory.
    pub fn open(dir: impl Into<PathBuf>) -> Result<TranscriptStore, GatewayError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|source| GatewayError::Store {
            path: dir.display().to_string(),
            source,
        })?;
        Ok(TranscriptStore { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn entry_path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entry_path(key).exists()
    }

    pub fn load(&self, key: &str) -> Result<TranscriptEntry, GatewayError> {
        let path = self.entry_path(key);
        if !path.exists() {
            return Err(GatewayError::ReplayMiss {
                key: key.to_string(),
            });
        }
        let bytes = std::fs::read(&path).map_err(|source| GatewayError::Store {
            path: path.display().to_string(),
            source,
        })?;
        let entry: TranscriptEntry =
            serde_json::from_slice(&bytes).map_err(|e| GatewayError::CorruptEntry {
                key: key.to_string(),
                reason: e.to_string(),
            })?;
        if entry.key != key {
            return Err(GatewayError::CorruptEntry {
                key: key.to_string(),
                reason: format!("entry self-reports key {}", entry.key),
            });
        }
        Ok(entry)
    }

    /// Record an entry unless one already exists for its key.
    pub fn save(&self, entry: &TranscriptEntry) -> Result<(), GatewayError> {
        let path = self.entry_path(&entry.key);
        if path.exists() {
            return Ok(());
        }
        let tmp = self.dir.join(format!(".{}.tmp", entry.key));
        let json = serde_json::to_vec_pretty(entry).expect("transcript entries serialize");
        let io_err = |source: std::io::Error| GatewayError::Store {
            path: path.display().to_string(),
            source,
        };
        std::fs::write(&tmp, json).map_err(io_err)?;
        std::fs::rename(&tmp, &path).map_err(io_err)?;
        Ok(())
    }
}

/// Replays recorded completions; any unseen request is a replay miss.
pub struct ReplayGateway {
    store: TranscriptStore,
}

impl ReplayGateway {
    pub fn new(store: TranscriptStore) -> Self {
        ReplayGateway { store }
    }
}

impl Gateway for ReplayGateway {
    fn complete(&self, req: &GenerationRequest) -> Result<Vec<Completion>, GatewayError> {
        let entry = self.store.load(&req.key())?;
        Ok(entry.completions)
    }
}

/// Wraps another gateway and records every exchange into a store.
pub struct RecordingGateway<G> {
    inner: G,
    store: TranscriptStore,
}

impl<G: Gateway> RecordingGateway<G> {
    pub fn new(inner: G, store: TranscriptStore) -> Self {
        RecordingGateway { inner, store }
    }
}

impl<G: Gateway> Gateway for RecordingGateway<G> {
    fn complete(&self, req: &GenerationRequest) -> Result<Vec<Completion>, GatewayError> {
        let key = req.key();
        // Serve from the store when present so record mode is resumable.
        if self.store.contains(&key) {
            return Ok(self.store.load(&key)?.completions);
        }
        let completions = self.inner.complete(req)?;
        self.store.save(&TranscriptEntry {
            key,
            request: req.clone(),
            completions: completions.clone(),
        })?;
        Ok(completions)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{Message, ScriptedGateway, TokenUsage};

    fn req(content: &str) -> GenerationRequest {
        GenerationRequest::greedy("gpt-4", vec![Message::user(content)])
    }

    #[test]
    fn record_then_replay_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let store = TranscriptStore::open(dir.path()).unwrap();
        let scripted = ScriptedGateway::respond_with("The answer is: (A) 50");
        let recorder = RecordingGateway::new(scripted, store.clone());

        let r = req("What is 6 x 7?");
        let first = recorder.complete(&r).unwrap();

        let replay = ReplayGateway::new(store);
        let second = replay.complete(&r).unwrap();
        assert_eq!(first, second);
        assert_eq!(second[0].text, "The answer is: (A) 50");
        assert_ne!(second[0].usage, TokenUsage::default());
    }

    #[test]
    fn replay_miss_names_the_key() {
        let dir = tempfile::tempdir().unwrap();
        let store = TranscriptStore::open(dir.path()).unwrap();
        let replay = ReplayGateway::new(store);
        let r = req("unseen");
        match replay.complete(&r) {
            Err(GatewayError::ReplayMiss { key }) => assert_eq!(key, r.key()),
            other => panic!("expected replay miss, got {other:?}"),
        }
    }

    #[test]
    fn recording_is_append_only() {
        let dir = tempfile::tempdir().unwrap();
        let store = TranscriptStore::open(dir.path()).unwrap();
        let r = req("q");
        let entry = TranscriptEntry {
            key: r.key(),
            request: r.clone(),
            completions: vec![Completion {
                text: "original".into(),
                usage: TokenUsage::new(1, 1),
                finish_reason: "stop".into(),
            }],
        };
        store.save(&entry).unwrap();

        // A second recorder run with different inner output must not clobber.
        let recorder =
            RecordingGateway::new(ScriptedGateway::respond_with("changed"), store.clone());
        let out = recorder.complete(&r).unwrap();
        assert_eq!(out[0].text, "original");
    }
}
