//! Confirmation of inspection findings: similarity checking against the
//! reference record, inference-conflict filtering, and threshold sensitivity.

pub mod checker;
pub mod conflict;
pub mod kernels;
pub mod sweep;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

pub use checker::{is_flagged, similarity_check, CheckerParams, ParamError, SimilarityScores};
pub use conflict::{conflict_check, ConsistencyStatus, ConsistencyVerdict, FieldConflict};
pub use kernels::{control_similarity, logical_similarity, numeric_similarity};
pub use sweep::{sensitivity_sweep, sweep_families, LabeledScores, Metrics, SweepError, SweepFamily, SweepReport};

use crate::inspector::{usage_key, Finding, Phase, SnapshotError, SnapshotRepository};
use crate::kb::KnowledgeBase;
use crate::retrieval::{retrieve_reference, RetrievalError, SignatureWeights};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FinalVerdict {
    Violation,
    DiscardedConflict,
    RejectedSimilar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationVerdict {
    pub finding: Finding,
    pub reference_id: String,
    pub scores: SimilarityScores,
    pub flagged: bool,
    pub conflict: ConsistencyVerdict,
    #[serde(rename = "final")]
    pub final_verdict: FinalVerdict,
}

#[derive(Debug, Error)]
pub enum DetectionError {
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Snapshot(#[from] SnapshotError),
}

fn decide(flagged: bool, conflict: &ConsistencyVerdict) -> FinalVerdict {
    if !conflict.is_consistent() {
        FinalVerdict::DiscardedConflict
    } else if flagged {
        FinalVerdict::Violation
    } else {
        FinalVerdict::RejectedSimilar
    }
}

/// Confirms each finding. The detection-intake snapshot is captured first for
/// every finding (marking the component as security-relevant, since it
/// reached detection), then scoring and conflict checks run in parallel.
pub fn finalize_verdicts(
    findings: Vec<Finding>,
    kb: &KnowledgeBase,
    weights: &SignatureWeights,
    params: &CheckerParams,
    repository: &SnapshotRepository,
) -> Result<Vec<ViolationVerdict>, DetectionError> {
    let mut findings = findings;
    for f in &mut findings {
        let u = &f.usage;
        let payload = json!({
            "signature": u.signature.render(),
            "security": "critical",
            "parameters": u.signature.param_count,
            "return_type": u.signature.return_type,
            "related_calls": u.related_calls,
        });
        let id = repository.capture(Phase::Stage4, &usage_key(u), payload.as_object().expect("object"))?;
        f.snapshots.push(id);
    }
    findings
        .into_par_iter()
        .map(|finding| {
            let hit = retrieve_reference(&finding.usage.signature, kb, weights)?;
            let (scores, flagged) = similarity_check(&finding.usage, hit.record, params);
            let conflict = conflict_check(&finding.snapshots, repository, &finding.threat_vectors)?;
            let final_verdict = decide(flagged, &conflict);
            debug_assert!(final_verdict != FinalVerdict::Violation || (flagged && conflict.is_consistent()));
            Ok(ViolationVerdict {
                reference_id: hit.record.id.clone(),
                finding,
                scores,
                flagged,
                conflict,
                final_verdict,
            })
        })
        .collect()
}
