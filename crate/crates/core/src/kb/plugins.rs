//! Plugin suite exposed to the analysis plan: tool-invoking plugins wrap
//! program analysis, response-processing plugins reshape tool output.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use super::source::ScrSourceUnit;
use crate::features::compiler::{compile_to_model, SolidityCompiler};
use crate::features::graph::CompositeGraph;
use crate::features::model::{ContractDecl, ContractKind, FunctionDecl, FunctionId};
use crate::features::signature::function_display_name;
use crate::features::cfg::CfgNodeKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PluginId {
    #[serde(rename = "compile_solidity_contract")]
    CompileSolidityContract,
    #[serde(rename = "read_specified_range")]
    ReadSpecifiedRange,
    #[serde(rename = "get_all_contracts")]
    GetAllContracts,
    #[serde(rename = "judge_interface")]
    JudgeInterface,
    #[serde(rename = "get_all_functions_by_contract")]
    GetAllFunctionsByContract,
    #[serde(rename = "extract_calls_by_function")]
    ExtractCallsByFunction,
    #[serde(rename = "extract_CFG_by_function")]
    ExtractCfgByFunction,
    #[serde(rename = "json_data_parsing")]
    JsonDataParsing,
    #[serde(rename = "list_data_parsing")]
    ListDataParsing,
    #[serde(rename = "exception_parsing")]
    ExceptionParsing,
}

/// Declared return type of a plugin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReturnShape {
    Class,
    List,
    Bool,
    Json,
    Map,
    String,
}

impl ReturnShape {
    pub fn admits(self, value: &Value) -> bool {
        match self {
            ReturnShape::Class | ReturnShape::Json | ReturnShape::Map => value.is_object(),
            ReturnShape::List => value.is_array(),
            ReturnShape::Bool => value.is_boolean(),
            ReturnShape::String => value.is_string(),
        }
    }
}

impl PluginId {
    pub const ALL: [PluginId; 10] = [
        PluginId::CompileSolidityContract,
        PluginId::ReadSpecifiedRange,
        PluginId::GetAllContracts,
        PluginId::JudgeInterface,
        PluginId::GetAllFunctionsByContract,
        PluginId::ExtractCallsByFunction,
        PluginId::ExtractCfgByFunction,
        PluginId::JsonDataParsing,
        PluginId::ListDataParsing,
        PluginId::ExceptionParsing,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PluginId::CompileSolidityContract => "compile_solidity_contract",
            PluginId::ReadSpecifiedRange => "read_specified_range",
            PluginId::GetAllContracts => "get_all_contracts",
            PluginId::JudgeInterface => "judge_interface",
            PluginId::GetAllFunctionsByContract => "get_all_functions_by_contract",
            PluginId::ExtractCallsByFunction => "extract_calls_by_function",
            PluginId::ExtractCfgByFunction => "extract_CFG_by_function",
            PluginId::JsonDataParsing => "json_data_parsing",
            PluginId::ListDataParsing => "list_data_parsing",
            PluginId::ExceptionParsing => "exception_parsing",
        }
    }

    pub fn return_shape(self) -> ReturnShape {
        match self {
            PluginId::CompileSolidityContract => ReturnShape::Class,
            PluginId::ReadSpecifiedRange
            | PluginId::GetAllContracts
            | PluginId::GetAllFunctionsByContract
            | PluginId::ExtractCallsByFunction => ReturnShape::List,
            PluginId::JudgeInterface => ReturnShape::Bool,
            PluginId::ExtractCfgByFunction => ReturnShape::Json,
            PluginId::JsonDataParsing | PluginId::ListDataParsing => ReturnShape::Map,
            PluginId::ExceptionParsing => ReturnShape::String,
        }
    }
}

impl fmt::Display for PluginId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PluginId {
    type Err = PluginError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PluginId::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| PluginError::UnknownPlugin(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PluginResult {
    pub plugin: PluginId,
    pub shape: ReturnShape,
    pub value: Value,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PluginError {
    #[error("unknown plugin `{0}`")]
    UnknownPlugin(String),
    #[error("plugin {plugin} failed: {message}")]
    PluginFailure { plugin: PluginId, message: String },
}

/// What plugins operate on: one compiled unit and its composite graph.
pub struct PluginContext<'a> {
    pub unit: &'a ScrSourceUnit,
    pub graph: &'a CompositeGraph,
    pub compiler: Option<&'a dyn SolidityCompiler>,
}

fn fail(plugin: PluginId, message: impl Into<String>) -> PluginError {
    PluginError::PluginFailure {
        plugin,
        message: message.into(),
    }
}

fn arg<'v>(plugin: PluginId, args: &'v BTreeMap<String, Value>, key: &str) -> Result<&'v Value, PluginError> {
    args.get(key).ok_or_else(|| fail(plugin, format!("missing argument `{key}`")))
}

fn arg_str<'v>(plugin: PluginId, args: &'v BTreeMap<String, Value>, key: &str) -> Result<&'v str, PluginError> {
    arg(plugin, args, key)?
        .as_str()
        .ok_or_else(|| fail(plugin, format!("argument `{key}` must be a string")))
}

fn kind_name(kind: ContractKind) -> &'static str {
    match kind {
        ContractKind::Contract => "contract",
        ContractKind::Abstract => "abstract",
        ContractKind::Library => "library",
        ContractKind::Interface => "interface",
    }
}

impl<'a> PluginContext<'a> {
    fn contract(&self, plugin: PluginId, name: &str) -> Result<&'a ContractDecl, PluginError> {
        self.unit
            .compiled_model
            .contract(name)
            .ok_or_else(|| fail(plugin, format!("no contract `{name}` in {}", self.unit.id)))
    }

    fn function(&self, plugin: PluginId, contract: &str, id: &str) -> Result<(&'a FunctionDecl, FunctionId), PluginError> {
        let c = self.contract(plugin, contract)?;
        c.functions
            .iter()
            .find_map(|f| {
                self.graph
                    .function_id(f.ast_id)
                    .filter(|fid| fid.0 == id)
                    .map(|fid| (f, fid.clone()))
            })
            .ok_or_else(|| fail(plugin, format!("no function `{id}` in contract `{contract}`")))
    }
}

/// Runs one plugin. The result's shape always matches the plugin's declared return type.
pub fn invoke_plugin(ctx: &PluginContext<'_>, plugin_id: &str, args: &BTreeMap<String, Value>) -> Result<PluginResult, PluginError> {
    let plugin: PluginId = plugin_id.parse()?;
    let value = run(ctx, plugin, args)?;
    debug_assert!(plugin.return_shape().admits(&value));
    Ok(PluginResult {
        plugin,
        shape: plugin.return_shape(),
        value,
    })
}

fn run(ctx: &PluginContext<'_>, plugin: PluginId, args: &BTreeMap<String, Value>) -> Result<Value, PluginError> {
    let model = &ctx.unit.compiled_model;
    match plugin {
        PluginId::CompileSolidityContract => {
            let path = arg_str(plugin, args, "path")?;
            let p = Path::new(path);
            if p == ctx.unit.path || path == ctx.unit.id {
                return serde_json::to_value(model).map_err(|e| fail(plugin, e.to_string()));
            }
            let compiler = ctx.compiler.ok_or_else(|| fail(plugin, "no compiler configured"))?;
            let compiled = compile_to_model(compiler, p).map_err(|e| fail(plugin, e.to_string()))?;
            serde_json::to_value(compiled).map_err(|e| fail(plugin, e.to_string()))
        }
        PluginId::ReadSpecifiedRange => {
            let range = arg(plugin, args, "range")?
                .as_array()
                .filter(|r| r.len() == 2)
                .and_then(|r| Some((r[0].as_u64()? as usize, r[1].as_u64()? as usize)))
                .ok_or_else(|| fail(plugin, "argument `range` must be [first_line, last_line]"))?;
            let file = args.get("file").and_then(Value::as_str).unwrap_or(&ctx.unit.id);
            let text = if file == ctx.unit.id || Path::new(file) == ctx.unit.path {
                ctx.unit.source_text.clone()
            } else {
                std::fs::read_to_string(file).map_err(|e| fail(plugin, format!("{file}: {e}")))?
            };
            let (first, last) = range;
            if first == 0 || last < first {
                return Err(fail(plugin, format!("invalid line range [{first},{last}]")));
            }
            Ok(Value::Array(
                text.lines()
                    .skip(first - 1)
                    .take(last - first + 1)
                    .map(|l| Value::String(l.to_string()))
                    .collect(),
            ))
        }
        PluginId::GetAllContracts => Ok(Value::Array(
            model
                .contracts
                .iter()
                .filter(|c| model.is_primary(c))
                .map(|c| {
                    json!({
                        "name": c.name,
                        "kind": kind_name(c.kind),
                        "bases": c.bases,
                        "function_count": c.functions.len(),
                    })
                })
                .collect(),
        )),
        PluginId::JudgeInterface => {
            let c = ctx.contract(plugin, arg_str(plugin, args, "contract")?)?;
            let unimplemented = !c.functions.is_empty() && c.functions.iter().all(|f| !f.has_body());
            Ok(Value::Bool(c.is_interface || unimplemented))
        }
        PluginId::GetAllFunctionsByContract => {
            let c = ctx.contract(plugin, arg_str(plugin, args, "contract")?)?;
            Ok(Value::Array(
                c.functions
                    .iter()
                    .map(|f| {
                        json!({
                            "id": ctx.graph.function_id(f.ast_id).map(|i| i.0.clone()),
                            "name": function_display_name(f),
                            "params": f.params,
                            "return_types": f.return_types,
                            "modifiers": f.modifiers.iter().map(|m| m.condition.clone()).collect::<Vec<_>>(),
                            "implemented": f.has_body(),
                            "overrides": f.overrides,
                        })
                    })
                    .collect(),
            ))
        }
        PluginId::ExtractCallsByFunction => {
            let (_, id) = ctx.function(plugin, arg_str(plugin, args, "contract")?, arg_str(plugin, args, "function")?)?;
            let cfg = ctx.graph.cfg(&id);
            let dfg = ctx.graph.dfg_per_function.get(&id);
            Ok(Value::Array(
                ctx.graph
                    .pcg
                    .edges_from(&id)
                    .map(|e| {
                        let node = cfg.and_then(|c| c.node_of_call(e.call_id));
                        let resolved: Vec<Value> = e
                            .args
                            .iter()
                            .map(|a| {
                                let sources: Vec<String> = match (node, cfg, dfg) {
                                    (Some(n), Some(cfg), Some(dfg)) => dfg
                                        .edges
                                        .iter()
                                        .filter(|du| du.use_ == n && mentions(a, &du.var))
                                        .map(|du| {
                                            let def = &cfg.nodes[du.def];
                                            if def.kind == CfgNodeKind::Entry {
                                                format!("parameter {}", du.var)
                                            } else {
                                                def.text.clone()
                                            }
                                        })
                                        .collect(),
                                    _ => Vec::new(),
                                };
                                json!({"text": a, "definitions": sources})
                            })
                            .collect();
                        json!({
                            "callee": e.callee.0,
                            "kind": e.kind,
                            "target": format!("{}.{}", e.target.contract, e.target.function),
                            "text": e.text,
                            "args": resolved,
                        })
                    })
                    .collect(),
            ))
        }
        PluginId::ExtractCfgByFunction => {
            let (_, id) = ctx.function(plugin, arg_str(plugin, args, "contract")?, arg_str(plugin, args, "function")?)?;
            let cfg = ctx.graph.cfg(&id).cloned().unwrap_or_default();
            Ok(json!({
                "function": id.0,
                "counts": cfg.counts(),
                "nodes": cfg.nodes.iter().map(|n| json!({"id": n.id, "kind": n.kind, "text": n.text})).collect::<Vec<_>>(),
                "edges": cfg.edges,
            }))
        }
        PluginId::JsonDataParsing => {
            let data = arg(plugin, args, "data")?;
            let obj = data.as_object().ok_or_else(|| fail(plugin, "`data` must be a JSON object"))?;
            let fields = strategy_fields(args);
            let mut out = Map::new();
            for (k, v) in obj {
                if fields.as_ref().is_none_or(|f| f.contains(k)) {
                    out.insert(k.clone(), v.clone());
                }
            }
            Ok(Value::Object(out))
        }
        PluginId::ListDataParsing => {
            let data = arg(plugin, args, "data")?;
            let items = data.as_array().ok_or_else(|| fail(plugin, "`data` must be a list"))?;
            let key = args
                .get("strategy")
                .and_then(|s| s.get("key"))
                .and_then(Value::as_str);
            let fields = strategy_fields(args);
            let mut out = Map::new();
            for (i, item) in items.iter().enumerate() {
                let k = key
                    .and_then(|k| item.get(k))
                    .map(|v| v.as_str().map(str::to_string).unwrap_or_else(|| v.to_string()))
                    .unwrap_or_else(|| i.to_string());
                let v = match (item.as_object(), &fields) {
                    (Some(obj), Some(f)) => Value::Object(obj.iter().filter(|(k, _)| f.contains(*k)).map(|(k, v)| (k.clone(), v.clone())).collect()),
                    _ => item.clone(),
                };
                out.insert(k, v);
            }
            Ok(Value::Object(out))
        }
        PluginId::ExceptionParsing => {
            let exception = arg(plugin, args, "exception")?;
            let text = exception.as_str().map(str::to_string).unwrap_or_else(|| exception.to_string());
            let template = args.get("template_id").and_then(Value::as_str).unwrap_or("tool_failure");
            Ok(Value::String(crate::prompts::render(
                crate::prompts::uke_exception_template(template),
                &[("exception", text.as_str())],
            )))
        }
    }
}

fn strategy_fields(args: &BTreeMap<String, Value>) -> Option<Vec<String>> {
    args.get("strategy")?
        .get("fields")?
        .as_array()
        .map(|f| f.iter().filter_map(Value::as_str).map(str::to_string).collect())
}

/// Whether `var` appears in `text` as a whole identifier.
fn mentions(text: &str, var: &str) -> bool {
    text.match_indices(var).any(|(i, _)| {
        let before = text[..i].chars().next_back();
        let after = text[i + var.len()..].chars().next();
        let ident = |c: Option<char>| c.is_some_and(|c| c.is_alphanumeric() || c == '_' || c == '$');
        !ident(before) && !ident(after)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_round_trip_and_unknown_rejected() {
        for p in PluginId::ALL {
            assert_eq!(p.as_str().parse::<PluginId>().unwrap(), p);
            assert_eq!(serde_json::to_value(p).unwrap(), Value::String(p.as_str().into()));
        }
        assert_eq!("run_shell".parse::<PluginId>(), Err(PluginError::UnknownPlugin("run_shell".into())));
    }

    #[test]
    fn identifier_mentions() {
        assert!(mentions("_path", "_path"));
        assert!(mentions("f(a,b)", "a"));
        assert!(!mentions("amount", "amo"));
        assert!(!mentions("x_path", "_path"));
    }
}
