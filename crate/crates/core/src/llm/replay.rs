//! Replay backend: responses recorded ahead of time, looked up by request digest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use super::{CompletionRequest, LlmBackend, LlmError};
use crate::util::write_atomic;

/// Recorded responses keyed by request digest, persisted as one JSON object.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FixtureStore {
    pub path: Option<PathBuf>,
    pub entries: BTreeMap<String, String>,
}

impl FixtureStore {
    pub fn load(path: &Path) -> Result<Self, LlmError> {
        let text = std::fs::read_to_string(path).map_err(|e| LlmError::Io(format!("{}: {e}", path.display())))?;
        let entries: BTreeMap<String, String> = serde_json::from_str(&text)
            .map_err(|e| LlmError::InvalidFixture(format!("{}: {e}", path.display())))?;
        Ok(FixtureStore {
            path: Some(path.to_path_buf()),
            entries,
        })
    }

    /// Loads the store at `path`, or an empty store bound to `path` when the file does not exist.
    pub fn load_or_empty(path: &Path) -> Result<Self, LlmError> {
        if path.exists() {
            Self::load(path)
        } else {
            Ok(FixtureStore {
                path: Some(path.to_path_buf()),
                entries: BTreeMap::new(),
            })
        }
    }

    pub fn get(&self, request: &CompletionRequest) -> Option<&str> {
        self.entries.get(&request.digest()).map(String::as_str)
    }

    /// Inserts a response, warning when an existing digest is overwritten.
    pub fn insert(&mut self, request: &CompletionRequest, response: &str) -> Result<(), LlmError> {
        if response.trim().is_empty() {
            return Err(LlmError::InvalidFixture(format!(
                "empty response for digest {} (stage {})",
                request.digest(),
                request.stage_tag
            )));
        }
        let digest = request.digest();
        if let Some(old) = self.entries.insert(digest.clone(), response.to_string()) {
            if old != response {
                log::warn!("overwriting recorded response for digest {digest} (stage {})", request.stage_tag);
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), LlmError> {
        let mut text = serde_json::to_string_pretty(&self.entries).map_err(|e| LlmError::Io(e.to_string()))?;
        text.push('\n');
        write_atomic(path, text.as_bytes()).map_err(|e| LlmError::Io(format!("{}: {e}", path.display())))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Records one response into the store file at `store_path` and returns the updated store.
pub fn record_fixture(request: &CompletionRequest, response: &str, store_path: &Path) -> Result<FixtureStore, LlmError> {
    let mut store = FixtureStore::load_or_empty(store_path)?;
    store.insert(request, response)?;
    store.save(store_path)?;
    Ok(store)
}

/// Answers from a fixture store. In strict mode a missing digest is an error;
/// otherwise it yields an empty response and a warning.
#[derive(Debug, Clone)]
pub struct ReplayBackend {
    store: FixtureStore,
    strict: bool,
}

impl ReplayBackend {
    pub fn new(store: FixtureStore, strict: bool) -> Self {
        ReplayBackend { store, strict }
    }

    pub fn from_path(path: &Path, strict: bool) -> Result<Self, LlmError> {
        Ok(Self::new(FixtureStore::load(path)?, strict))
    }
}

impl LlmBackend for ReplayBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<String, LlmError> {
        request.validate()?;
        match self.store.get(request) {
            Some(text) => Ok(text.to_string()),
            None if self.strict => Err(LlmError::FixtureMiss {
                digest: request.digest(),
                stage: request.stage_tag.clone(),
            }),
            None => {
                log::warn!("no recorded response for digest {} (stage {})", request.digest(), request.stage_tag);
                Ok(String::new())
            }
        }
    }
}

/// Forwards to an inner backend and keeps every exchange for later saving as fixtures.
pub struct RecordingBackend<B> {
    inner: B,
    recorded: Mutex<FixtureStore>,
}

impl<B: LlmBackend> RecordingBackend<B> {
    pub fn new(inner: B) -> Self {
        RecordingBackend {
            inner,
            recorded: Mutex::new(FixtureStore::default()),
        }
    }

    /// Records on top of an existing store; exchanges with a known digest are overwritten.
    pub fn with_store(inner: B, store: FixtureStore) -> Self {
        RecordingBackend {
            inner,
            recorded: Mutex::new(store),
        }
    }

    pub fn into_store(self) -> FixtureStore {
        self.recorded.into_inner().unwrap_or_else(|e| e.into_inner())
    }
}

impl<B: LlmBackend> LlmBackend for RecordingBackend<B> {
    fn complete(&self, request: &CompletionRequest) -> Result<String, LlmError> {
        let text = self.inner.complete(request)?;
        if !text.trim().is_empty() {
            self.recorded
                .lock()
                .unwrap_or_else(|e| e.into_inner())
                .insert(request, &text)?;
        }
        Ok(text)
    }
}
