//! JSON-lines persistence of knowledge-base records.

use std::path::{Path, PathBuf};

use serde_json::Value;
use thiserror::Error;

use super::ScrRecord;
use crate::util::write_atomic;

/// Record layout version written on every line.
pub const KB_SCHEMA_VERSION: u64 = 1;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KnowledgeBase {
    pub records: Vec<ScrRecord>,
}

impl KnowledgeBase {
    pub fn new(records: Vec<ScrRecord>) -> Self {
        KnowledgeBase { records }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&ScrRecord> {
        self.records.iter().find(|r| r.id == id)
    }
}

#[derive(Debug, Error)]
pub enum KbError {
    #[error("knowledge base I/O failure at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {reason}")]
    SchemaMismatch { line: usize, reason: String },
}

/// Serializes records, one JSON object per line, each carrying `schema_version`.
pub fn to_jsonl(records: &[ScrRecord]) -> String {
    let mut out = String::new();
    for r in records {
        let mut v = serde_json::to_value(r).expect("records serialize");
        if let Value::Object(map) = &mut v {
            map.insert("schema_version".into(), KB_SCHEMA_VERSION.into());
        }
        out.push_str(&v.to_string());
        out.push('\n');
    }
    out
}

pub fn from_jsonl(text: &str) -> Result<KnowledgeBase, KbError> {
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mismatch = |reason: String| KbError::SchemaMismatch { line: line_no, reason };
        let mut v: Value = serde_json::from_str(line).map_err(|e| mismatch(format!("not JSON: {e}")))?;
        let version = v
            .as_object_mut()
            .and_then(|m| m.remove("schema_version"))
            .ok_or_else(|| mismatch("missing schema_version".into()))?;
        if version.as_u64() != Some(KB_SCHEMA_VERSION) {
            return Err(mismatch(format!("unsupported schema_version {version}")));
        }
        let record: ScrRecord = serde_json::from_value(v).map_err(|e| mismatch(e.to_string()))?;
        records.push(record);
    }
    Ok(KnowledgeBase { records })
}

pub fn store_kb(records: &[ScrRecord], path: &Path) -> Result<(), KbError> {
    write_atomic(path, to_jsonl(records).as_bytes()).map_err(|source| KbError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_kb(path: &Path) -> Result<KnowledgeBase, KbError> {
    let text = std::fs::read_to_string(path).map_err(|source| KbError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    from_jsonl(&text)
}
