//! Runs the analysis plan over source units and assembles knowledge-base records.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use super::knowledge::{run_comprehension, FunctionBrief};
use super::plan::{plan_tasks, SubTask, SubTaskKind};
use super::plugins::{invoke_plugin, PluginContext, PluginId, PluginResult, ReturnShape};
use super::source::ScrSourceUnit;
use super::{ScrRecord, UsageKnowledge};
use crate::features::compiler::SolidityCompiler;
use crate::features::expr::canonical_return;
use crate::features::graph::{build_composite_graph, CompositeGraph};
use crate::features::sequence::function_guard_sequence;
use crate::features::signature::{extract_signature, function_display_name};
use crate::features::{extract_embedding, ContractDecl, FunctionDecl, FunctionId};
use crate::llm::{LlmBackend, LlmError};

#[derive(Debug, Error)]
pub enum BuildError {
    #[error("{unit}: {source}")]
    Backend {
        unit: String,
        #[source]
        source: LlmError,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub task: SubTask,
    pub output: Value,
}

#[derive(Debug, Clone, Default)]
pub struct KbBuildReport {
    pub records: Vec<ScrRecord>,
    pub diagnostics: Vec<String>,
    /// Executed plan per unit id.
    pub transcripts: BTreeMap<String, Vec<TranscriptEntry>>,
}

/// Reshapes raw tool output with the matching response-processing plugin.
fn process(ctx: &PluginContext<'_>, result: PluginResult) -> Value {
    let (parser, strategy) = match (result.plugin, result.shape) {
        (PluginId::GetAllContracts, _) => (PluginId::ListDataParsing, json!({"key": "name"})),
        (PluginId::GetAllFunctionsByContract, _) => (PluginId::ListDataParsing, json!({"key": "id"})),
        (PluginId::ExtractCallsByFunction, _) => (
            PluginId::ListDataParsing,
            json!({"key": "text", "fields": ["target", "kind", "args"]}),
        ),
        (PluginId::ExtractCfgByFunction, _) => (PluginId::JsonDataParsing, json!({"fields": ["counts", "nodes"]})),
        (_, ReturnShape::List) => (PluginId::ListDataParsing, json!({})),
        (_, ReturnShape::Json) => (PluginId::JsonDataParsing, json!({})),
        _ => return result.value,
    };
    let args = BTreeMap::from([("data".to_string(), result.value.clone()), ("strategy".to_string(), strategy)]);
    invoke_plugin(ctx, parser.as_str(), &args).map(|r| r.value).unwrap_or(result.value)
}

fn tool_failure(ctx: &PluginContext<'_>, message: &str) -> Value {
    let args = BTreeMap::from([
        ("exception".to_string(), Value::String(message.to_string())),
        ("template_id".to_string(), Value::String("tool_failure".into())),
    ]);
    invoke_plugin(ctx, PluginId::ExceptionParsing.as_str(), &args)
        .map(|r| r.value)
        .unwrap_or_else(|_| Value::String(message.to_string()))
}

fn locate<'m>(graph: &CompositeGraph, contract: &'m ContractDecl, id: &str) -> Option<&'m FunctionDecl> {
    contract
        .functions
        .iter()
        .find(|f| graph.function_id(f.ast_id).is_some_and(|fid| fid.0 == id))
}

fn brief(unit: &ScrSourceUnit, contract: &ContractDecl, f: &FunctionDecl, tools: &[Value]) -> FunctionBrief {
    let model = &unit.compiled_model;
    let source = model
        .source(f.span.file)
        .and_then(|s| s.slice(&f.span))
        .map(str::to_string)
        .unwrap_or_default();
    FunctionBrief {
        signature: extract_signature(f, contract),
        definition: format!(
            "{}.{}({})",
            contract.name,
            function_display_name(f),
            f.params.iter().map(|p| p.ty.as_str()).collect::<Vec<_>>().join(",")
        ),
        parameters: f
            .params
            .iter()
            .enumerate()
            .map(|(i, p)| format!("{i}: {} {}", p.ty, p.name).trim_end().to_string())
            .collect(),
        returns: f.return_types.clone(),
        bases: contract.bases.clone(),
        source,
        tools: serde_json::to_string_pretty(tools).unwrap_or_default(),
    }
}

struct UnitOutput {
    records: Vec<ScrRecord>,
    diagnostics: Vec<String>,
    transcript: Vec<TranscriptEntry>,
}

fn process_unit(
    unit: &ScrSourceUnit,
    backend: &dyn LlmBackend,
    compiler: Option<&dyn SolidityCompiler>,
) -> Result<UnitOutput, BuildError> {
    let model = &unit.compiled_model;
    let graph = build_composite_graph(model);
    let ctx = PluginContext {
        unit,
        graph: &graph,
        compiler,
    };
    let mut transcript = Vec::new();
    let mut tools: BTreeMap<String, Vec<Value>> = BTreeMap::new();
    let mut knowledge: BTreeMap<String, UsageKnowledge> = BTreeMap::new();
    let mut rationale: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut diagnostics = Vec::new();

    for task in plan_tasks(unit) {
        let function = task.args.get("function").cloned();
        let output = match task.kind {
            SubTaskKind::ToolInvocation => {
                let plugin = task.plugin_id.expect("tool task names its plugin");
                let args: BTreeMap<String, Value> =
                    task.args.iter().map(|(k, v)| (k.clone(), Value::String(v.clone()))).collect();
                let out = match invoke_plugin(&ctx, plugin.as_str(), &args) {
                    Ok(r) => process(&ctx, r),
                    Err(e) => {
                        diagnostics.push(format!("{}: {e}", unit.id));
                        tool_failure(&ctx, &e.to_string())
                    }
                };
                if let Some(f) = &function {
                    tools.entry(f.clone()).or_default().push(json!({ plugin.as_str(): out.clone() }));
                }
                out
            }
            SubTaskKind::Comprehension => {
                let template = task.prompt_template_id.clone().unwrap_or_default();
                let contract = task.args.get("contract").and_then(|c| model.contract(c));
                let fid = function.clone().unwrap_or_default();
                match contract.and_then(|c| locate(&graph, c, &fid).map(|f| (c, f))) {
                    Some((c, f)) => {
                        let b = brief(unit, c, f, tools.get(&fid).map(Vec::as_slice).unwrap_or(&[]));
                        let answer = run_comprehension(&template, &b, backend).map_err(|source| BuildError::Backend {
                            unit: unit.id.clone(),
                            source,
                        })?;
                        match answer {
                            Ok(k) => {
                                let entry = knowledge.entry(fid.clone()).or_default();
                                entry.param_constraints.extend(k.param_constraints.clone());
                                entry.return_checks.extend(k.return_checks.clone());
                                entry.override_obligations.extend(k.override_obligations.clone());
                                if !k.free_text_rationale.is_empty() {
                                    rationale.entry(fid.clone()).or_default().push(k.free_text_rationale.clone());
                                }
                                serde_json::to_value(&k).unwrap_or(Value::Null)
                            }
                            Err(e) => {
                                let d = format!("{}: {e}", b.signature);
                                log::warn!("{d}");
                                diagnostics.push(d.clone());
                                Value::String(d)
                            }
                        }
                    }
                    None => Value::String(format!("no function `{fid}`")),
                }
            }
        };
        transcript.push(TranscriptEntry { task, output });
    }

    let mut records = Vec::new();
    for contract in model.contracts.iter().filter(|c| model.is_primary(c)) {
        for f in &contract.functions {
            let Some(id) = graph.function_id(f.ast_id) else { continue };
            let mut k = knowledge.remove(&id.0).unwrap_or_default();
            k.free_text_rationale = rationale.remove(&id.0).unwrap_or_default().join(" ");
            let cfg = graph.cfg(id).cloned().unwrap_or_default();
            let record_diags: Vec<String> = diagnostics
                .iter()
                .filter(|d| d.starts_with(&extract_signature(f, contract).render()))
                .cloned()
                .collect();
            records.push(ScrRecord {
                id: record_id(&unit.id, id),
                signature: extract_signature(f, contract),
                sequence: function_guard_sequence(f, &cfg),
                embedding: extract_embedding(f, id, &graph),
                knowledge: k,
                provenance: unit.id.clone(),
                diagnostics: record_diags,
            });
            debug_assert_eq!(canonical_return(&f.return_types), records.last().map(|r| r.signature.return_type.clone()).unwrap_or_default());
        }
    }
    Ok(UnitOutput {
        records,
        diagnostics,
        transcript,
    })
}

pub fn record_id(unit_id: &str, function: &FunctionId) -> String {
    format!("{unit_id}::{function}")
}

/// Builds records for every unit, in parallel across units. Records sharing an
/// exact signature keep the first occurrence in unit order.
pub fn build_records(
    units: &[ScrSourceUnit],
    backend: &dyn LlmBackend,
    compiler: Option<&dyn SolidityCompiler>,
) -> Result<KbBuildReport, BuildError> {
    let outputs: Vec<Result<UnitOutput, BuildError>> =
        units.par_iter().map(|u| process_unit(u, backend, compiler)).collect();
    let mut report = KbBuildReport::default();
    let mut seen = BTreeSet::new();
    for (unit, out) in units.iter().zip(outputs) {
        let out = out?;
        for r in out.records {
            if seen.insert(r.signature.clone()) {
                report.records.push(r);
            } else {
                log::info!("dropping duplicate signature {} from {}", r.signature, r.id);
            }
        }
        report.diagnostics.extend(out.diagnostics);
        report.transcripts.insert(unit.id.clone(), out.transcript);
    }
    Ok(report)
}
