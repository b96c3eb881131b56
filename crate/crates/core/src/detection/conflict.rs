//! Inference-conflict filter over the snapshots of one usage.

use std::collections::BTreeMap;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::inspector::{FieldValue, Phase, Snapshot, SnapshotError, SnapshotField, SnapshotRepository};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConsistencyStatus {
    Consistent,
    Conflict,
}

/// Two inferences about the same fact that disagree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldConflict {
    pub field: SnapshotField,
    pub phase_a: Phase,
    pub value_a: String,
    pub phase_b: Phase,
    pub value_b: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsistencyVerdict {
    pub status: ConsistencyStatus,
    pub conflicting_fields: Vec<FieldConflict>,
}

impl ConsistencyVerdict {
    fn from_conflicts(conflicting_fields: Vec<FieldConflict>) -> Self {
        let status = if conflicting_fields.is_empty() {
            ConsistencyStatus::Consistent
        } else {
            ConsistencyStatus::Conflict
        };
        ConsistencyVerdict { status, conflicting_fields }
    }

    pub fn is_consistent(&self) -> bool {
        self.status == ConsistencyStatus::Consistent
    }
}

static PARAMETER_PASSING: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)\b(parameter|argument)s?\b.{0,20}\bpass|\bpass\w*\b.{0,20}\b(parameter|argument)s?\b")
        .expect("valid regex")
});
static RETURN_VALUE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\breturn(ed)?[\s-]+values?\b").expect("valid regex"));

/// Whether a threat vector is about passing parameters.
pub fn mentions_parameter_passing(threat: &str) -> bool {
    PARAMETER_PASSING.is_match(threat)
}

/// Whether a threat vector is about handling a returned value.
pub fn mentions_return_value(threat: &str) -> bool {
    RETURN_VALUE.is_match(threat)
}

/// Checks the snapshots of one usage for disagreement.
///
/// Field equality: every value recorded for a field must equal the first one
/// recorded (in snapshot order). Cross-field: a threat about parameter passing
/// contradicts a function without parameters, and a threat about a returned
/// value contradicts a `void` function, as recorded at feature extraction.
pub fn conflict_check(
    ids: &[u64],
    repository: &SnapshotRepository,
    threats: &[String],
) -> Result<ConsistencyVerdict, SnapshotError> {
    let mut snaps: Vec<Snapshot> = ids.iter().map(|id| repository.get(*id)).collect::<Result<_, _>>()?;
    snaps.sort_by_key(|s| s.id);
    let mut conflicts = Vec::new();
    let mut first: BTreeMap<SnapshotField, (Phase, &FieldValue)> = BTreeMap::new();
    for s in &snaps {
        for (field, value) in &s.fields {
            match first.get(field) {
                None => {
                    first.insert(*field, (s.phase, value));
                }
                Some((phase, seen)) if *seen != value => conflicts.push(FieldConflict {
                    field: *field,
                    phase_a: *phase,
                    value_a: seen.to_string(),
                    phase_b: s.phase,
                    value_b: value.to_string(),
                }),
                Some(_) => {}
            }
        }
    }
    if let Some(fe) = snaps.iter().find(|s| s.phase == Phase::FeatureExtraction) {
        let text = |f| match fe.fields.get(&f) {
            Some(FieldValue::Text(t)) => Some(t.as_str()),
            _ => None,
        };
        type Rule = (SnapshotField, &'static str, fn(&str) -> bool);
        let rules: [Rule; 2] = [
            (SnapshotField::Parameters, "0", mentions_parameter_passing),
            (SnapshotField::ReturnType, "void", mentions_return_value),
        ];
        for (field, value, mentions) in rules {
            if text(field) != Some(value) {
                continue;
            }
            for t in threats.iter().filter(|t| mentions(t)) {
                conflicts.push(FieldConflict {
                    field,
                    phase_a: Phase::FeatureExtraction,
                    value_a: value.into(),
                    phase_b: Phase::Stage2,
                    value_b: t.clone(),
                });
            }
        }
    }
    Ok(ConsistencyVerdict::from_conflicts(conflicts))
}
