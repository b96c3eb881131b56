//! End-to-end analysis of one business contract.

use thiserror::Error;

use crate::detection::{finalize_verdicts, DetectionError, FinalVerdict, CheckerParams, ViolationVerdict};
use crate::features::{build_composite_graph, detect_scr_usages, ContractModel};
use crate::inspector::{
    inspect_contract, ContractContext, InspectError, Inspector, SnapshotRepository, UsageOutcome,
};
use crate::kb::KnowledgeBase;
use crate::llm::LlmBackend;
use crate::report::{ContractReport, InspectorEntry, StageVerdict, Summary, VerdictEntry};
use crate::retrieval::SignatureWeights;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Inspect(#[from] InspectError),
    #[error(transparent)]
    Detection(#[from] DetectionError),
}

/// Inputs shared by every contract of a run.
pub struct Analyzer<'a> {
    pub kb: &'a KnowledgeBase,
    pub weights: &'a SignatureWeights,
    pub params: &'a CheckerParams,
    pub backend: &'a dyn LlmBackend,
}

/// Source text of the model's primary files, in file order.
pub fn primary_source(model: &ContractModel) -> String {
    model
        .sources
        .iter()
        .filter(|s| s.primary)
        .filter_map(|s| s.text.as_deref())
        .collect::<Vec<_>>()
        .join("\n")
}

fn rationale(v: &ViolationVerdict, params: &CheckerParams) -> String {
    let f = &v.finding;
    let yes: Vec<String> = f
        .stage_outputs
        .iter()
        .filter(|o| o.verdict.is_yes())
        .map(|o| o.stage.to_string())
        .collect();
    let mut parts = vec![format!("inspection answered Yes at {}", yes.join(", "))];
    let composite = v.scores.composite(f.group, params);
    let (tau, name) = match f.group {
        crate::features::UsageGroup::Comprehensive => (params.tau_o, "tau_o"),
        crate::features::UsageGroup::Targeted => (params.tau_t, "tau_t"),
    };
    let relation = if composite < tau { "below" } else { "at or above" };
    parts.push(format!("structural similarity {composite:.4} is {relation} {name} {tau}"));
    if let Some(s_l) = v.scores.s_l {
        let relation = if s_l < params.tau_l { "below" } else { "at or above" };
        parts.push(format!("guard similarity {s_l:.4} is {relation} tau_l {}", params.tau_l));
    }
    parts.push(if v.conflict.is_consistent() {
        "snapshots agree".to_string()
    } else {
        format!("{} snapshot conflict(s)", v.conflict.conflicting_fields.len())
    });
    parts.join("; ")
}

/// Detects usages, inspects them, and confirms the findings. Snapshots are
/// appended to `repository`.
pub fn analyze_model(
    label: &str,
    model: &ContractModel,
    analyzer: &Analyzer<'_>,
    repository: &SnapshotRepository,
) -> Result<ContractReport, PipelineError> {
    let graph = build_composite_graph(model);
    let usages = detect_scr_usages(model, &graph);
    log::info!("{label}: {} usage(s)", usages.len());
    let context = ContractContext {
        name: label.to_string(),
        source: primary_source(model),
    };
    let inspector = Inspector {
        backend: analyzer.backend,
        kb: analyzer.kb,
        weights: analyzer.weights,
        snapshots: repository,
    };
    let inspection = inspect_contract(&inspector, &context, &usages)?;
    let mut inspector_entries = Vec::new();
    let mut findings = Vec::new();
    for outcome in inspection.outcomes {
        match outcome {
            UsageOutcome::Finding(f) => findings.push(*f),
            UsageOutcome::Cleared { usage, stage } => inspector_entries.push(InspectorEntry {
                usage,
                stage,
                outcome: "cleared".into(),
                problem: None,
            }),
            UsageOutcome::Dropped { usage, stage, problem } => inspector_entries.push(InspectorEntry {
                usage,
                stage,
                outcome: "dropped".into(),
                problem: Some(problem),
            }),
        }
    }
    let verdicts = finalize_verdicts(findings, analyzer.kb, analyzer.weights, analyzer.params, repository)?;
    let mut summary = Summary {
        candidates: usages.len(),
        inspector_dropped: inspector_entries.len(),
        ..Summary::default()
    };
    let mut entries = Vec::with_capacity(verdicts.len());
    for v in verdicts {
        match v.final_verdict {
            FinalVerdict::Violation => summary.violations += 1,
            FinalVerdict::DiscardedConflict => summary.conflicts_discarded += 1,
            FinalVerdict::RejectedSimilar => summary.similarity_rejected += 1,
        }
        let snapshots = v
            .finding
            .snapshots
            .iter()
            .map(|id| repository.get(*id))
            .collect::<Result<Vec<_>, _>>()
            .map_err(DetectionError::from)?;
        let f = &v.finding;
        entries.push(VerdictEntry {
            usage: crate::inspector::usage_key(&f.usage),
            kind: f.usage.kind,
            group: f.group,
            signature: f.usage.signature.render(),
            site: f.usage.site.clone(),
            text: f.usage.text.clone(),
            reference_id: v.reference_id.clone(),
            scores: v.scores,
            composite: v.scores.composite(f.group, analyzer.params),
            flagged: v.flagged,
            conflict: v.conflict.clone(),
            final_verdict: v.final_verdict,
            threat_vectors: f.threat_vectors.clone(),
            stages: f
                .stage_outputs
                .iter()
                .map(|o| StageVerdict {
                    stage: o.stage,
                    verdict: o.verdict,
                })
                .collect(),
            snapshots,
            rationale: rationale(&v, analyzer.params),
        });
    }
    debug_assert!(summary.is_conserved());
    Ok(ContractReport {
        contract: label.to_string(),
        verdicts: entries,
        inspector: inspector_entries,
        summary,
    })
}
