//! The two inspection tracks. Stage calls for one usage are strictly sequential.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use super::snapshot::{Phase, SnapshotError, SnapshotRepository};
use super::stage::{parse_stage_response, Stage, StageOutput, StructureViolation};
use super::{usage_key, Finding};
use crate::features::{ScrUsage, UsageGroup, UsageKind};
use crate::kb::KnowledgeBase;
use crate::llm::{CompletionRequest, LlmBackend, LlmError};
use crate::prompts::{luv_template, render};
use crate::retrieval::{retrieve_reference, RetrievalError, RetrievalHit, SignatureWeights};

#[derive(Debug, Error)]
pub enum InspectError {
    #[error("backend unavailable: {0}")]
    Backend(#[from] LlmError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Snapshot(#[from] SnapshotError),
}

/// The business contract under inspection.
#[derive(Debug, Clone)]
pub struct ContractContext {
    pub name: String,
    pub source: String,
}

/// Shared inputs of both tracks.
pub struct Inspector<'a> {
    pub backend: &'a dyn LlmBackend,
    pub kb: &'a KnowledgeBase,
    pub weights: &'a SignatureWeights,
    pub snapshots: &'a SnapshotRepository,
}

/// What happened to one usage during inspection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum UsageOutcome {
    Finding(Box<Finding>),
    /// Every relevant stage answered No or Unknown.
    Cleared { usage: String, stage: Stage },
    /// A stage answer stayed malformed after the retry.
    Dropped { usage: String, stage: Stage, problem: String },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Inspection {
    pub outcomes: Vec<UsageOutcome>,
}

impl Inspection {
    pub fn findings(&self) -> impl Iterator<Item = &Finding> {
        self.outcomes.iter().filter_map(|o| match o {
            UsageOutcome::Finding(f) => Some(f.as_ref()),
            _ => None,
        })
    }

    pub fn into_findings(self) -> Vec<Finding> {
        self.outcomes
            .into_iter()
            .filter_map(|o| match o {
                UsageOutcome::Finding(f) => Some(*f),
                _ => None,
            })
            .collect()
    }

    pub fn diagnostics(&self) -> Vec<String> {
        self.outcomes
            .iter()
            .filter_map(|o| match o {
                UsageOutcome::Dropped { usage, stage, problem } => Some(format!("{usage}: {stage}: {problem}")),
                _ => None,
            })
            .collect()
    }
}

fn system_text() -> String {
    render(luv_template("system").unwrap_or_default(), &[])
}

fn stage_request(stage: Stage, vars: &[(&str, &str)]) -> CompletionRequest {
    let user = render(luv_template(stage.id()).unwrap_or_default(), vars);
    CompletionRequest::new(&format!("luv/{}", stage.id()), &system_text(), &user)
}

fn retry_request(first: &CompletionRequest, problem: &str) -> CompletionRequest {
    let user = render(
        luv_template("retry").unwrap_or_default(),
        &[("request", &first.user_text), ("problem", problem)],
    );
    CompletionRequest::new(&format!("{}/retry", first.stage_tag), &first.system_text, &user)
}

/// Issues a stage request; a malformed answer is retried once.
fn ask(
    backend: &dyn LlmBackend,
    stage: Stage,
    vars: &[(&str, &str)],
) -> Result<Result<StageOutput, StructureViolation>, LlmError> {
    let first = stage_request(stage, vars);
    let text = backend.complete(&first)?;
    let problem = match parse_stage_response(&text, stage) {
        Ok(out) => return Ok(Ok(out)),
        Err(v) => v.problem,
    };
    log::info!("{stage}: retrying after malformed answer: {problem}");
    let text = backend.complete(&retry_request(&first, &problem))?;
    Ok(parse_stage_response(&text, stage))
}

/// Fields of a stage answer that go into its snapshot.
fn snapshot_payload(structured: &Map<String, Value>, phase: Phase) -> Map<String, Value> {
    structured
        .iter()
        .filter(|(k, _)| k.parse().is_ok_and(|f| phase.allows(f)))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect()
}

fn joined(items: &[String]) -> String {
    if items.is_empty() {
        "(none)".into()
    } else {
        items.join(", ")
    }
}

struct UsageVars {
    kind: String,
    site: String,
    line: String,
    signature: String,
    sequence: String,
    related_calls: String,
}

impl UsageVars {
    fn of(u: &ScrUsage) -> Self {
        UsageVars {
            kind: format!("{:?}", u.kind),
            site: format!("{}.{}", u.site.contract, u.site.function),
            line: u.site.line.map_or("?".into(), |l| l.to_string()),
            signature: u.signature.render(),
            sequence: u.sequence.to_string(),
            related_calls: joined(&u.related_calls),
        }
    }
}

struct ReferenceVars {
    reference: String,
    score: String,
    sequence: String,
    knowledge: String,
}

impl ReferenceVars {
    fn of(hit: &RetrievalHit<'_>) -> Self {
        ReferenceVars {
            reference: format!("{} [{}]", hit.record.signature, hit.record.id),
            score: format!("{:.3}", hit.score),
            sequence: hit.record.sequence.to_string(),
            knowledge: hit.record.knowledge.summary(),
        }
    }
}

/// Comprehensive track for one inheritance or override usage. A finding is
/// produced when any of the three stages answers Yes; threat vectors come
/// from the removed-logic stage.
pub fn run_comprehensive(
    inspector: &Inspector<'_>,
    contract: &ContractContext,
    usage: &ScrUsage,
    hit: &RetrievalHit<'_>,
    feature_snapshot: u64,
) -> Result<UsageOutcome, InspectError> {
    debug_assert!(matches!(usage.kind, UsageKind::Inherit | UsageKind::Override));
    let key = usage_key(usage);
    let uv = UsageVars::of(usage);
    let rv = ReferenceVars::of(hit);
    let vars: Vec<(&str, &str)> = vec![
        ("source", &contract.source),
        ("kind", &uv.kind),
        ("definition", &usage.definition),
        ("site", &uv.site),
        ("line", &uv.line),
        ("signature", &uv.signature),
        ("reference", &rv.reference),
        ("score", &rv.score),
        ("knowledge", &rv.knowledge),
        ("related_calls", &uv.related_calls),
    ];
    let mut outputs = Vec::new();
    let mut snapshots = vec![feature_snapshot];
    for (stage, phase) in [(Stage::C1, Phase::Stage1), (Stage::C2, Phase::Stage2), (Stage::C3, Phase::Stage3)] {
        let out = match ask(inspector.backend, stage, &vars)? {
            Ok(out) => out,
            Err(v) => {
                log::warn!("{key}: {v}");
                return Ok(UsageOutcome::Dropped {
                    usage: key,
                    stage,
                    problem: v.problem,
                });
            }
        };
        snapshots.push(inspector.snapshots.capture(phase, &key, &snapshot_payload(&out.structured, phase))?);
        outputs.push(out);
    }
    if !outputs.iter().any(|o| o.verdict.is_yes()) {
        return Ok(UsageOutcome::Cleared { usage: key, stage: Stage::C3 });
    }
    Ok(UsageOutcome::Finding(Box::new(Finding {
        usage: usage.clone(),
        group: UsageGroup::Comprehensive,
        threat_vectors: outputs[1].threats(),
        stage_outputs: outputs,
        snapshots,
        reference_id: hit.record.id.clone(),
        reference_score: hit.score,
    })))
}

fn call_listing(usages: &[&ScrUsage]) -> String {
    usages
        .iter()
        .enumerate()
        .map(|(i, u)| {
            format!(
                "{i}. {} (line {}, in {}.{}) signature {} definition {}",
                u.text,
                u.site.line.map_or("?".into(), |l| l.to_string()),
                u.site.contract,
                u.site.function,
                u.signature,
                u.definition
            )
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Targeted track over all calls of one contract. The preliminary stage sees
/// every call at once; flagged calls then get a threat-vector stage and a
/// validation stage against the retrieved reference. Only calls confirmed by
/// the validation stage become findings.
///
/// `feature_snapshots[i]` is the feature-extraction snapshot of `usages[i]`.
pub fn run_targeted(
    inspector: &Inspector<'_>,
    contract: &ContractContext,
    usages: &[&ScrUsage],
    feature_snapshots: &[u64],
) -> Result<Inspection, InspectError> {
    debug_assert!(usages.iter().all(|u| u.kind == UsageKind::Call));
    let mut inspection = Inspection::default();
    if usages.is_empty() {
        return Ok(inspection);
    }
    let listing = call_listing(usages);
    let t1 = match ask(inspector.backend, Stage::T1, &[("source", &contract.source), ("usages", &listing)])? {
        Ok(out) => out,
        Err(v) => {
            log::warn!("{}: {v}", contract.name);
            inspection.outcomes = usages
                .iter()
                .map(|u| UsageOutcome::Dropped {
                    usage: usage_key(u),
                    stage: Stage::T1,
                    problem: v.problem.clone(),
                })
                .collect();
            return Ok(inspection);
        }
    };
    let mut flagged: Vec<Option<Map<String, Value>>> = vec![None; usages.len()];
    if t1.verdict.is_yes() {
        for entry in t1.structured.get("usages").and_then(Value::as_array).into_iter().flatten() {
            let Some(obj) = entry.as_object() else { continue };
            match obj.get("index").and_then(Value::as_u64).map(|i| i as usize) {
                Some(i) if i < usages.len() => flagged[i] = Some(obj.clone()),
                other => log::warn!("{}: T1 names unknown call index {other:?}", contract.name),
            }
        }
    }
    for (i, usage) in usages.iter().enumerate() {
        let key = usage_key(usage);
        let Some(entry) = &flagged[i] else {
            inspection.outcomes.push(UsageOutcome::Cleared { usage: key, stage: Stage::T1 });
            continue;
        };
        let mut t1_usage = t1.clone();
        t1_usage.structured.insert("usages".into(), Value::Array(vec![Value::Object(entry.clone())]));
        let mut snapshots = vec![feature_snapshots[i]];
        snapshots.push(inspector.snapshots.capture(Phase::Stage1, &key, &snapshot_payload(entry, Phase::Stage1))?);
        let outcome = targeted_tail(inspector, contract, usage, &key, t1_usage, snapshots)?;
        inspection.outcomes.push(outcome);
    }
    Ok(inspection)
}

fn targeted_tail(
    inspector: &Inspector<'_>,
    contract: &ContractContext,
    usage: &ScrUsage,
    key: &str,
    t1: StageOutput,
    mut snapshots: Vec<u64>,
) -> Result<UsageOutcome, InspectError> {
    let uv = UsageVars::of(usage);
    let dropped = |stage, v: StructureViolation| {
        log::warn!("{key}: {v}");
        UsageOutcome::Dropped {
            usage: key.to_string(),
            stage,
            problem: v.problem,
        }
    };
    let t2 = match ask(
        inspector.backend,
        Stage::T2,
        &[
            ("source", &contract.source),
            ("text", &usage.text),
            ("line", &uv.line),
            ("site", &uv.site),
            ("signature", &uv.signature),
            ("definition", &usage.definition),
            ("sequence", &uv.sequence),
            ("related_calls", &uv.related_calls),
        ],
    )? {
        Ok(out) => out,
        Err(v) => return Ok(dropped(Stage::T2, v)),
    };
    snapshots.push(inspector.snapshots.capture(Phase::Stage2, key, &snapshot_payload(&t2.structured, Phase::Stage2))?);
    if !t2.verdict.is_yes() {
        return Ok(UsageOutcome::Cleared {
            usage: key.to_string(),
            stage: Stage::T2,
        });
    }
    let threats = t2.threats();
    let hit = retrieve_reference(&usage.signature, inspector.kb, inspector.weights)?;
    let rv = ReferenceVars::of(&hit);
    let threat_text = joined(&threats);
    let t3 = match ask(
        inspector.backend,
        Stage::T3,
        &[
            ("text", &usage.text),
            ("line", &uv.line),
            ("site", &uv.site),
            ("signature", &uv.signature),
            ("definition", &usage.definition),
            ("sequence", &uv.sequence),
            ("threats", &threat_text),
            ("reference", &rv.reference),
            ("score", &rv.score),
            ("reference_sequence", &rv.sequence),
            ("knowledge", &rv.knowledge),
        ],
    )? {
        Ok(out) => out,
        Err(v) => return Ok(dropped(Stage::T3, v)),
    };
    snapshots.push(inspector.snapshots.capture(Phase::Stage3, key, &snapshot_payload(&t3.structured, Phase::Stage3))?);
    if !t3.verdict.is_yes() {
        return Ok(UsageOutcome::Cleared {
            usage: key.to_string(),
            stage: Stage::T3,
        });
    }
    Ok(UsageOutcome::Finding(Box::new(Finding {
        usage: usage.clone(),
        group: UsageGroup::Targeted,
        threat_vectors: threats,
        stage_outputs: vec![t1, t2, t3],
        snapshots,
        reference_id: hit.record.id.clone(),
        reference_score: hit.score,
    })))
}

/// Both tracks over every usage of a contract, in usage order. Feature
/// extraction snapshots are captured here for every usage.
pub fn inspect_contract(
    inspector: &Inspector<'_>,
    contract: &ContractContext,
    usages: &[ScrUsage],
) -> Result<Inspection, InspectError> {
    let mut fe = Vec::with_capacity(usages.len());
    for u in usages {
        fe.push(inspector.snapshots.capture(
            Phase::FeatureExtraction,
            &usage_key(u),
            &super::feature_snapshot_payload(u),
        )?);
    }
    let (calls, others): (Vec<usize>, Vec<usize>) = (0..usages.len()).partition(|i| usages[*i].kind == UsageKind::Call);
    let call_refs: Vec<&ScrUsage> = calls.iter().map(|i| &usages[*i]).collect();
    let call_fe: Vec<u64> = calls.iter().map(|i| fe[*i]).collect();
    let targeted = run_targeted(inspector, contract, &call_refs, &call_fe)?;
    let mut by_index: Vec<Option<UsageOutcome>> = vec![None; usages.len()];
    for (i, o) in calls.iter().zip(targeted.outcomes) {
        by_index[*i] = Some(o);
    }
    for i in others {
        let hit = retrieve_reference(&usages[i].signature, inspector.kb, inspector.weights)?;
        by_index[i] = Some(run_comprehensive(inspector, contract, &usages[i], &hit, fe[i])?);
    }
    Ok(Inspection {
        outcomes: by_index.into_iter().flatten().collect(),
    })
}
