//! Per-phase snapshots of inferred usage facts, kept in an append-only repository.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Phase {
    FeatureExtraction,
    Stage1,
    Stage2,
    Stage3,
    Stage4,
}

impl Phase {
    pub const ALL: [Phase; 5] = [Phase::FeatureExtraction, Phase::Stage1, Phase::Stage2, Phase::Stage3, Phase::Stage4];

    /// Fields a snapshot of this phase may carry.
    pub fn allowed_fields(self) -> &'static [SnapshotField] {
        use SnapshotField::*;
        match self {
            Phase::FeatureExtraction => &[
                Signature,
                Definition,
                Parameters,
                ReturnType,
                ParentContract,
                OverriddenFunction,
                RelatedCalls,
            ],
            Phase::Stage1 => &[
                Signature,
                Security,
                Definition,
                Parameters,
                ReturnType,
                ParentContract,
                OverriddenFunction,
            ],
            Phase::Stage2 => &[Signature, Security, RelatedCalls],
            Phase::Stage3 => &[Signature, Security, Definition],
            Phase::Stage4 => &[Signature, Security, Parameters, ReturnType, RelatedCalls],
        }
    }

    pub fn allows(self, field: SnapshotField) -> bool {
        self.allowed_fields().contains(&field)
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnapshotField {
    Signature,
    Security,
    Definition,
    Parameters,
    ReturnType,
    ParentContract,
    OverriddenFunction,
    RelatedCalls,
}

impl SnapshotField {
    pub const ALL: [SnapshotField; 8] = [
        SnapshotField::Signature,
        SnapshotField::Security,
        SnapshotField::Definition,
        SnapshotField::Parameters,
        SnapshotField::ReturnType,
        SnapshotField::ParentContract,
        SnapshotField::OverriddenFunction,
        SnapshotField::RelatedCalls,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SnapshotField::Signature => "signature",
            SnapshotField::Security => "security",
            SnapshotField::Definition => "definition",
            SnapshotField::Parameters => "parameters",
            SnapshotField::ReturnType => "return_type",
            SnapshotField::ParentContract => "parent_contract",
            SnapshotField::OverriddenFunction => "overridden_function",
            SnapshotField::RelatedCalls => "related_calls",
        }
    }
}

impl fmt::Display for SnapshotField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SnapshotField {
    type Err = SnapshotError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SnapshotField::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| SnapshotError::UnknownField(s.to_string()))
    }
}

/// A normalized field value. Call lists compare as sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldValue {
    Text(String),
    Set(BTreeSet<String>),
}

impl fmt::Display for FieldValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldValue::Text(t) => f.write_str(t),
            FieldValue::Set(s) => write!(f, "{{{}}}", s.iter().cloned().collect::<Vec<_>>().join(", ")),
        }
    }
}

/// Case-folds and collapses runs of whitespace.
pub fn normalize_text(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

fn scalar_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        Value::Array(items) => items.iter().map(scalar_text).collect::<Vec<_>>().join(", "),
        other => other.to_string(),
    }
}

pub fn normalize_value(field: SnapshotField, v: &Value) -> FieldValue {
    if field == SnapshotField::RelatedCalls {
        let items: Vec<String> = match v {
            Value::Array(items) => items.iter().map(scalar_text).collect(),
            Value::String(s) => s.split(',').map(str::to_string).collect(),
            Value::Null => vec![],
            other => vec![other.to_string()],
        };
        return FieldValue::Set(items.iter().map(|s| normalize_text(s)).filter(|s| !s.is_empty()).collect());
    }
    FieldValue::Text(normalize_text(&scalar_text(v)))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Snapshot {
    pub id: u64,
    pub phase: Phase,
    /// Key of the usage the snapshot describes.
    pub usage: String,
    pub fields: BTreeMap<SnapshotField, FieldValue>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SnapshotError {
    #[error("field `{field}` is not captured at phase {phase}")]
    FieldNotAllowed { phase: Phase, field: SnapshotField },
    #[error("unknown snapshot field `{0}`")]
    UnknownField(String),
    #[error("unknown snapshot id {0}")]
    UnknownSnapshotId(u64),
}

/// Append-only store; ids follow append order and are unique.
#[derive(Debug, Default)]
pub struct SnapshotRepository {
    entries: Mutex<Vec<Snapshot>>,
}

impl SnapshotRepository {
    pub fn new() -> Self {
        SnapshotRepository::default()
    }

    /// Normalizes and appends a snapshot. Every payload key must be admissible
    /// at `phase`; nothing is stored otherwise.
    pub fn capture(&self, phase: Phase, usage: &str, payload: &Map<String, Value>) -> Result<u64, SnapshotError> {
        let mut fields = BTreeMap::new();
        for (key, value) in payload {
            let field: SnapshotField = key.parse()?;
            if !phase.allows(field) {
                return Err(SnapshotError::FieldNotAllowed { phase, field });
            }
            fields.insert(field, normalize_value(field, value));
        }
        let mut entries = self.entries.lock().expect("snapshot lock");
        let id = entries.len() as u64;
        entries.push(Snapshot {
            id,
            phase,
            usage: usage.to_string(),
            fields,
        });
        Ok(id)
    }

    pub fn get(&self, id: u64) -> Result<Snapshot, SnapshotError> {
        self.entries
            .lock()
            .expect("snapshot lock")
            .get(id as usize)
            .cloned()
            .ok_or(SnapshotError::UnknownSnapshotId(id))
    }

    pub fn snapshots(&self) -> Vec<Snapshot> {
        self.entries.lock().expect("snapshot lock").clone()
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("snapshot lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_jsonl(&self) -> String {
        self.snapshots()
            .iter()
            .map(|s| serde_json::to_string(s).expect("snapshots serialize") + "\n")
            .collect()
    }
}
