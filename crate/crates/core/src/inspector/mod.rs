//! Staged inspection of reusable-component usages: comprehensive analysis of
//! inheritance and overriding, targeted analysis of calls, and snapshot capture.

pub mod agent;
pub mod snapshot;
pub mod stage;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::features::{ScrUsage, UsageGroup};

pub use agent::{inspect_contract, run_comprehensive, run_targeted, ContractContext, InspectError, Inspection, Inspector, UsageOutcome};
pub use snapshot::{FieldValue, Phase, Snapshot, SnapshotError, SnapshotField, SnapshotRepository};
pub use stage::{parse_stage_response, Stage, StageOutput, StructureViolation, Verdict};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub usage: ScrUsage,
    pub group: UsageGroup,
    pub threat_vectors: Vec<String>,
    pub stage_outputs: Vec<StageOutput>,
    /// Snapshot ids for this usage, feature extraction first.
    pub snapshots: Vec<u64>,
    /// Knowledge-base record consulted during inspection.
    pub reference_id: String,
    pub reference_score: f64,
}

/// Stable key identifying a usage across snapshots and reports.
pub fn usage_key(u: &ScrUsage) -> String {
    format!(
        "{}.{}@{}:{:?}:{}",
        u.site.contract, u.site.function, u.site.span.start, u.kind, u.signature
    )
}

/// Facts known before any model is consulted.
pub fn feature_snapshot_payload(u: &ScrUsage) -> Map<String, Value> {
    let v = json!({
        "signature": u.signature.render(),
        "definition": u.definition,
        "parameters": u.signature.param_count,
        "return_type": u.signature.return_type,
        "parent_contract": u.parent_contract,
        "overridden_function": u.overridden_function,
        "related_calls": u.related_calls,
    });
    match v {
        Value::Object(m) => m,
        _ => unreachable!(),
    }
}
