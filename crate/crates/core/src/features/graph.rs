//! Composite program graph: call graph over all declared functions plus the
//! per-function control-flow and def-use graphs.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::cfg::{build_cfg, build_dfg, Cfg, Dfg};
use super::expr::{
    self, canonical_return, canonical_type, is_builtin_function, is_builtin_namespace, node_id,
    node_span, node_type, referenced_declaration, render, return_from_call_type, type_string,
};
use super::model::{ContractDecl, ContractModel, FunctionDecl, FunctionId, Span};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CallKind {
    Internal,
    External,
}

/// What a call expression invokes, as far as it can be resolved.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallTarget {
    pub contract: String,
    pub function: String,
    pub arity: usize,
    pub return_type: String,
    /// Whether the target is a function declared in the model.
    pub declared: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallEdge {
    pub caller: FunctionId,
    pub callee: FunctionId,
    pub kind: CallKind,
    pub target: CallTarget,
    pub call_id: i64,
    pub span: Span,
    pub text: String,
    pub args: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PcgNode {
    pub id: FunctionId,
    pub declared: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Pcg {
    pub nodes: Vec<PcgNode>,
    pub edges: Vec<CallEdge>,
}

impl Pcg {
    pub fn edges_from<'a>(&'a self, caller: &'a FunctionId) -> impl Iterator<Item = &'a CallEdge> + 'a {
        self.edges.iter().filter(move |e| &e.caller == caller)
    }

    pub fn count_from(&self, caller: &FunctionId, kind: CallKind) -> u32 {
        self.edges_from(caller).filter(|e| e.kind == kind).count() as u32
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CompositeGraph {
    pub pcg: Pcg,
    pub cfg_per_function: BTreeMap<FunctionId, Cfg>,
    pub dfg_per_function: BTreeMap<FunctionId, Dfg>,
    /// Function id assigned to each declaration's AST id.
    pub function_ids: BTreeMap<i64, FunctionId>,
}

impl CompositeGraph {
    pub fn function_id(&self, ast_id: i64) -> Option<&FunctionId> {
        self.function_ids.get(&ast_id)
    }

    pub fn cfg(&self, id: &FunctionId) -> Option<&Cfg> {
        self.cfg_per_function.get(id)
    }
}

/// Assigns ids to every declared function. Overloads sharing name and arity
/// get a `#n` suffix in declaration order.
pub fn assign_function_ids(model: &ContractModel) -> BTreeMap<i64, FunctionId> {
    let mut used = BTreeSet::new();
    let mut ids = BTreeMap::new();
    for r in model.functions() {
        let base = r.id();
        let mut id = base.clone();
        let mut n = 2;
        while used.contains(&id) {
            id = FunctionId(format!("{}#{n}", base.0));
            n += 1;
        }
        used.insert(id.clone());
        ids.insert(r.function.ast_id, id);
    }
    ids
}

/// Resolves a call expression made from inside `caller`. Returns `None` for
/// calls that never form call-graph edges: builtins, type conversions, struct
/// constructors, contract creation, and members of address or builtin values.
pub fn resolve_call(call: &Value, caller: &ContractDecl, model: &ContractModel) -> Option<(CallKind, CallTarget)> {
    if let Some(kind) = call.get("kind").and_then(Value::as_str) {
        if kind != "functionCall" {
            return None;
        }
    }
    let mut callee = &call["expression"];
    while node_type(callee) == "FunctionCallOptions" {
        callee = &callee["expression"];
    }
    let argc = call.get("arguments").and_then(Value::as_array).map_or(0, Vec::len);
    let index = model.function_index();
    let declared_target = |id: i64| {
        index.get(&id).map(|r| CallTarget {
            contract: r.contract.name.clone(),
            function: r.function.name.clone(),
            arity: r.function.arity(),
            return_type: canonical_return(&r.function.return_types),
            declared: true,
        })
    };
    let undeclared = |contract: String, function: &str| CallTarget {
        contract,
        function: function.to_string(),
        arity: argc,
        return_type: return_from_call_type(type_string(call)),
        declared: false,
    };

    let target = match node_type(callee) {
        "Identifier" => {
            let name = callee.get("name").and_then(Value::as_str).unwrap_or("");
            if is_builtin_function(name) {
                return None;
            }
            match referenced_declaration(callee) {
                Some(id) => declared_target(id)?,
                None if callee.get("referencedDeclaration").is_some() => return None,
                None => undeclared("unknown".into(), name),
            }
        }
        "MemberAccess" => {
            let member = callee.get("memberName").and_then(Value::as_str).unwrap_or("");
            let base = &callee["expression"];
            if node_type(base) == "Identifier" {
                let base_name = base.get("name").and_then(Value::as_str).unwrap_or("");
                if is_builtin_namespace(base_name) && !matches!(base_name, "this" | "super") {
                    return None;
                }
            }
            match referenced_declaration(callee) {
                Some(id) => declared_target(id)?,
                None => {
                    let contract = match type_string(base) {
                        None => "unknown".to_string(),
                        Some(t) if is_contract_type(t) => canonical_type(t),
                        Some(_) => return None,
                    };
                    undeclared(contract, member)
                }
            }
        }
        _ => return None,
    };

    let hierarchy = model.hierarchy(&caller.name);
    let kind = if target.declared && hierarchy.contains(&target.contract) {
        CallKind::Internal
    } else {
        CallKind::External
    };
    Some((kind, target))
}

fn is_contract_type(t: &str) -> bool {
    let t = t.strip_prefix("type(").unwrap_or(t);
    t.starts_with("contract ") || t.starts_with("library ")
}

/// Every call expression nested in a function body, in source order.
pub fn calls_in(function: &FunctionDecl) -> Vec<&Value> {
    let mut calls = Vec::new();
    for stmt in function.body_nodes.iter().flatten() {
        expr::walk(stmt, &mut |n| {
            if node_type(n) == "FunctionCall" {
                calls.push(n);
            }
        });
    }
    calls.sort_by_key(|c| (node_span(c).unwrap_or_default(), node_id(c)));
    calls
}

pub fn build_composite_graph(model: &ContractModel) -> CompositeGraph {
    let ids = assign_function_ids(model);
    let mut nodes: BTreeMap<FunctionId, bool> = ids.values().map(|id| (id.clone(), true)).collect();
    let mut edges = Vec::new();
    let mut cfgs = BTreeMap::new();
    let mut dfgs = BTreeMap::new();

    for r in model.functions() {
        let caller_id = ids[&r.function.ast_id].clone();
        let params: Vec<String> = r.function.params.iter().map(|p| p.name.clone()).filter(|n| !n.is_empty()).collect();
        let cfg = build_cfg(r.function.body_nodes.as_deref(), &params);
        dfgs.insert(caller_id.clone(), build_dfg(&cfg));
        cfgs.insert(caller_id.clone(), cfg);

        for call in calls_in(r.function) {
            let Some((kind, target)) = resolve_call(call, r.contract, model) else {
                continue;
            };
            let callee_id = if target.declared {
                referenced_declaration(&unwrap_options(&call["expression"]))
                    .and_then(|id| ids.get(&id).cloned())
                    .unwrap_or_else(|| FunctionId::new(&target.contract, &target.function, target.arity))
            } else {
                FunctionId::new(&target.contract, &target.function, target.arity)
            };
            nodes.entry(callee_id.clone()).or_insert(false);
            edges.push(CallEdge {
                caller: caller_id.clone(),
                callee: callee_id,
                kind,
                target,
                call_id: node_id(call).unwrap_or(-1),
                span: node_span(call).unwrap_or_default(),
                text: render(call),
                args: call
                    .get("arguments")
                    .and_then(Value::as_array)
                    .map(|a| a.iter().map(render).collect())
                    .unwrap_or_default(),
            });
        }
    }

    CompositeGraph {
        pcg: Pcg {
            nodes: nodes.into_iter().map(|(id, declared)| PcgNode { id, declared }).collect(),
            edges,
        },
        cfg_per_function: cfgs,
        dfg_per_function: dfgs,
        function_ids: ids,
    }
}

fn unwrap_options(callee: &Value) -> Value {
    let mut c = callee;
    while node_type(c) == "FunctionCallOptions" {
        c = &c["expression"];
    }
    c.clone()
}
