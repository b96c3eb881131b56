//! Analysis report: per-contract verdicts, inspection outcomes and summary counts.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::detection::{ConsistencyVerdict, FinalVerdict, SimilarityScores};
use crate::features::{UsageGroup, UsageKind, UsageSite};
use crate::inspector::{Snapshot, Stage, Verdict};

/// Layout version of the report document.
pub const REPORT_SCHEMA_VERSION: u64 = 1;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub candidates: usize,
    pub violations: usize,
    pub conflicts_discarded: usize,
    pub similarity_rejected: usize,
    pub inspector_dropped: usize,
}

impl Summary {
    pub fn add(&mut self, other: &Summary) {
        self.candidates += other.candidates;
        self.violations += other.violations;
        self.conflicts_discarded += other.conflicts_discarded;
        self.similarity_rejected += other.similarity_rejected;
        self.inspector_dropped += other.inspector_dropped;
    }

    /// Every candidate ends in exactly one bucket.
    pub fn is_conserved(&self) -> bool {
        self.candidates == self.violations + self.conflicts_discarded + self.similarity_rejected + self.inspector_dropped
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageVerdict {
    pub stage: Stage,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictEntry {
    pub usage: String,
    pub kind: UsageKind,
    pub group: UsageGroup,
    pub signature: String,
    pub site: UsageSite,
    pub text: String,
    pub reference_id: String,
    pub scores: SimilarityScores,
    pub composite: f64,
    pub flagged: bool,
    pub conflict: ConsistencyVerdict,
    #[serde(rename = "final")]
    pub final_verdict: FinalVerdict,
    pub threat_vectors: Vec<String>,
    pub stages: Vec<StageVerdict>,
    pub snapshots: Vec<Snapshot>,
    pub rationale: String,
}

/// A usage that left the pipeline during inspection.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InspectorEntry {
    pub usage: String,
    pub stage: Stage,
    /// `cleared` when the stages answered No, `dropped` when an answer stayed malformed.
    pub outcome: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractReport {
    pub contract: String,
    pub verdicts: Vec<VerdictEntry>,
    pub inspector: Vec<InspectorEntry>,
    pub summary: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub schema_version: u64,
    pub contracts: Vec<ContractReport>,
    pub summary: Summary,
}

impl AnalysisReport {
    pub fn new(contracts: Vec<ContractReport>) -> Self {
        let mut summary = Summary::default();
        for c in &contracts {
            summary.add(&c.summary);
        }
        AnalysisReport {
            schema_version: REPORT_SCHEMA_VERSION,
            contracts,
            summary,
        }
    }

    /// Canonical serialized form: pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
        match value.get("schema_version").and_then(serde_json::Value::as_u64) {
            Some(REPORT_SCHEMA_VERSION) => {}
            other => return Err(format!("unsupported report schema_version {other:?}")),
        }
        serde_json::from_value(value).map_err(|e| e.to_string())
    }

    pub fn violations(&self) -> impl Iterator<Item = &VerdictEntry> {
        self.contracts
            .iter()
            .flat_map(|c| &c.verdicts)
            .filter(|v| v.final_verdict == FinalVerdict::Violation)
    }
}

fn fmt_score(x: f64) -> String {
    format!("{x:.4}")
}

/// Plain-text rendering, one block per verdict.
pub fn render_text(report: &AnalysisReport) -> String {
    let mut out = String::new();
    for c in &report.contracts {
        let _ = writeln!(out, "contract {}", c.contract);
        for v in &c.verdicts {
            let head = match v.final_verdict {
                FinalVerdict::Violation => "VIOLATION",
                FinalVerdict::DiscardedConflict => "DISCARDED-CONFLICT",
                FinalVerdict::RejectedSimilar => "REJECTED-SIMILAR",
            };
            let line = v.site.line.map_or("?".to_string(), |l| l.to_string());
            let _ = writeln!(
                out,
                "{head} {} at {}.{} line {line} (span {})",
                v.signature, v.site.contract, v.site.function, v.site.span
            );
            let _ = writeln!(out, "  usage: {} [{:?}, {}]", v.text, v.kind, v.group);
            let _ = writeln!(out, "  reference: {}", v.reference_id);
            let s_l = v.scores.s_l.map_or("-".to_string(), fmt_score);
            let _ = writeln!(
                out,
                "  scores: s_n {} s_c {} s_l {s_l} composite {} flagged {}",
                fmt_score(v.scores.s_n),
                fmt_score(v.scores.s_c),
                fmt_score(v.composite),
                v.flagged
            );
            if !v.threat_vectors.is_empty() {
                let _ = writeln!(out, "  threats: {}", v.threat_vectors.join("; "));
            }
            if v.conflict.conflicting_fields.is_empty() {
                let _ = writeln!(out, "  snapshot conflicts: none");
            }
            for fc in &v.conflict.conflicting_fields {
                let _ = writeln!(
                    out,
                    "  snapshot conflict: {} {} = `{}` vs {} = `{}`",
                    fc.field, fc.phase_a, fc.value_a, fc.phase_b, fc.value_b
                );
            }
            let _ = writeln!(out, "  rationale: {}", v.rationale);
        }
        for e in &c.inspector {
            let _ = writeln!(
                out,
                "INSPECTOR-{} {} at {}{}",
                e.outcome.to_uppercase(),
                e.usage,
                e.stage,
                e.problem.as_ref().map(|p| format!(": {p}")).unwrap_or_default()
            );
        }
    }
    let s = &report.summary;
    let _ = writeln!(
        out,
        "summary: {} violations, {} conflicts discarded, {} similarity rejected, {} inspector dropped, {} candidates",
        s.violations, s.conflicts_discarded, s.similarity_rejected, s.inspector_dropped, s.candidates
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_report_text_and_json() {
        let r = AnalysisReport::new(vec![]);
        assert!(render_text(&r).contains("0 violations"));
        let json = r.to_json();
        assert_eq!(AnalysisReport::from_json(&json).unwrap().to_json(), json);
        assert!(AnalysisReport::from_json(r#"{"schema_version": 9, "contracts": [], "summary": {}}"#).is_err());
    }
}
