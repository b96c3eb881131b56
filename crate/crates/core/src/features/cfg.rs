//! Per-function control-flow and def-use graphs built from statement ASTs.
//!
//! Node classification: declarations are `variable` nodes; assignments, calls
//! and arithmetic are `expression` nodes; `if`, ternaries and `require`/`assert`
//! are `conditional`; `for`/`while`/`do` headers are `loop`. A `return` with a
//! value contributes an `expression` node for the value followed by the
//! `return` node. Nodes unreachable from the entry are pruned.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use petgraph::algo::dominators::simple_fast;
use petgraph::graph::{DiGraph, NodeIndex};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::expr::{self, node_id, node_span, node_type, render, type_string};
use super::model::Span;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CfgNodeKind {
    Entry,
    Variable,
    Expression,
    Conditional,
    Loop,
    Return,
}

/// Guard semantics attached to a node, used for logical-sequence extraction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "role", content = "condition", rename_all = "snake_case")]
pub enum GuardRole {
    Require(String),
    If(String),
    Revert(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CfgNode {
    pub id: usize,
    pub kind: CfgNodeKind,
    pub text: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub span: Option<Span>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub guard: Option<GuardRole>,
    /// AST ids of the call expressions evaluated at this node.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub calls: Vec<i64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub defs: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub uses: Vec<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CfgCounts {
    pub entry: u32,
    pub variable: u32,
    pub expression: u32,
    pub conditional: u32,
    pub loops: u32,
    pub returns: u32,
}

impl CfgCounts {
    pub fn as_array(&self) -> [u32; 6] {
        [
            self.entry,
            self.variable,
            self.expression,
            self.conditional,
            self.loops,
            self.returns,
        ]
    }

    pub fn total(&self) -> u32 {
        self.as_array().iter().sum()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Cfg {
    pub nodes: Vec<CfgNode>,
    pub edges: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DefUse {
    pub def: usize,
    #[serde(rename = "use")]
    pub use_: usize,
    pub var: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Dfg {
    pub edges: Vec<DefUse>,
}

impl Cfg {
    pub const ENTRY: usize = 0;

    pub fn counts(&self) -> CfgCounts {
        let mut c = CfgCounts::default();
        for n in &self.nodes {
            match n.kind {
                CfgNodeKind::Entry => c.entry += 1,
                CfgNodeKind::Variable => c.variable += 1,
                CfgNodeKind::Expression => c.expression += 1,
                CfgNodeKind::Conditional => c.conditional += 1,
                CfgNodeKind::Loop => c.loops += 1,
                CfgNodeKind::Return => c.returns += 1,
            }
        }
        c
    }

    pub fn successors(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges
            .iter()
            .filter(move |(a, _)| *a == node)
            .map(|(_, b)| *b)
    }

    /// Node evaluating the call expression with the given AST id.
    pub fn node_of_call(&self, call_id: i64) -> Option<usize> {
        self.nodes
            .iter()
            .find(|n| n.calls.contains(&call_id))
            .map(|n| n.id)
    }

    /// Immediate dominator of each node (`None` for the entry).
    pub fn immediate_dominators(&self) -> Vec<Option<usize>> {
        let mut g: DiGraph<(), ()> = DiGraph::new();
        let idx: Vec<NodeIndex> = self.nodes.iter().map(|_| g.add_node(())).collect();
        for (a, b) in &self.edges {
            g.add_edge(idx[*a], idx[*b], ());
        }
        if self.nodes.is_empty() {
            return Vec::new();
        }
        let doms = simple_fast(&g, idx[Self::ENTRY]);
        idx.iter()
            .map(|i| {
                doms.immediate_dominator(*i)
                    .map(|d| d.index())
                    .filter(|d| *d != i.index())
            })
            .collect()
    }

    /// Strict dominators of `node`, nearest last.
    pub fn dominators_of(&self, node: usize) -> Vec<usize> {
        let idom = self.immediate_dominators();
        let mut chain = Vec::new();
        let mut cur = idom.get(node).copied().flatten();
        while let Some(d) = cur {
            chain.push(d);
            cur = idom[d];
        }
        chain.reverse();
        chain
    }

    /// Nodes reachable from `from` (inclusive).
    pub fn reachable_from(&self, from: usize) -> BTreeSet<usize> {
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::from([from]);
        while let Some(n) = queue.pop_front() {
            if seen.insert(n) {
                queue.extend(self.successors(n));
            }
        }
        seen
    }
}

#[derive(Default)]
struct LoopCtx {
    breaks: Vec<usize>,
    continues: Vec<usize>,
}

struct Builder {
    nodes: Vec<CfgNode>,
    edges: Vec<(usize, usize)>,
    loops: Vec<LoopCtx>,
}

impl Builder {
    fn add(&mut self, kind: CfgNodeKind, text: String, span: Option<Span>, preds: &[usize]) -> usize {
        let id = self.nodes.len();
        self.nodes.push(CfgNode {
            id,
            kind,
            text,
            span,
            guard: None,
            calls: Vec::new(),
            defs: Vec::new(),
            uses: Vec::new(),
        });
        for p in preds {
            self.edges.push((*p, id));
        }
        id
    }

    /// Adds a node evaluating `expr_node` and records its calls and def/use sets.
    fn add_eval(
        &mut self,
        kind: CfgNodeKind,
        text: String,
        span: Option<Span>,
        expr_node: Option<&Value>,
        preds: &[usize],
    ) -> usize {
        let id = self.add(kind, text, span, preds);
        if let Some(e) = expr_node {
            let (defs, uses) = def_use(e);
            let node = &mut self.nodes[id];
            node.calls = call_ids(e);
            node.defs = defs;
            node.uses = uses;
        }
        id
    }

    fn block(&mut self, stmts: &[Value], mut preds: Vec<usize>) -> Vec<usize> {
        for s in stmts {
            preds = self.stmt(s, preds);
        }
        preds
    }

    fn stmt(&mut self, s: &Value, preds: Vec<usize>) -> Vec<usize> {
        use CfgNodeKind::*;
        let span = node_span(s);
        match node_type(s) {
            "Block" | "UncheckedBlock" => {
                let stmts = s.get("statements").and_then(Value::as_array).cloned().unwrap_or_default();
                self.block(&stmts, preds)
            }
            "VariableDeclarationStatement" => {
                let names: Vec<String> = s
                    .get("declarations")
                    .and_then(Value::as_array)
                    .map(|ds| {
                        ds.iter()
                            .filter(|d| !d.is_null())
                            .filter_map(|d| d.get("name").and_then(Value::as_str))
                            .map(str::to_string)
                            .collect()
                    })
                    .unwrap_or_default();
                let decls: Vec<String> = s
                    .get("declarations")
                    .and_then(Value::as_array)
                    .map(|ds| ds.iter().filter(|d| !d.is_null()).map(render).collect())
                    .unwrap_or_default();
                let init = s.get("initialValue").filter(|v| !v.is_null());
                let mut text = if decls.len() == 1 {
                    decls[0].clone()
                } else {
                    format!("({})", decls.join(","))
                };
                if let Some(i) = init {
                    text = format!("{text}={}", render(i));
                }
                let id = self.add_eval(Variable, text, span, init, &preds);
                let node = &mut self.nodes[id];
                for n in names {
                    if !node.defs.contains(&n) {
                        node.defs.push(n);
                    }
                }
                vec![id]
            }
            "ExpressionStatement" => {
                let e = &s["expression"];
                self.expression_statement(e, span, preds)
            }
            "EmitStatement" => {
                let call = &s["eventCall"];
                let id = self.add_eval(Expression, format!("emit {}", render(call)), span, Some(call), &preds);
                vec![id]
            }
            "RevertStatement" => {
                let call = &s["errorCall"];
                let id = self.add_eval(Expression, format!("revert {}", render(call)), span, Some(call), &preds);
                self.nodes[id].guard = Some(GuardRole::Revert(render(call)));
                Vec::new()
            }
            "Throw" => {
                let id = self.add(Expression, "throw".into(), span, &preds);
                self.nodes[id].guard = Some(GuardRole::Revert(String::new()));
                Vec::new()
            }
            "Return" => {
                let value = s.get("expression").filter(|v| !v.is_null());
                match value {
                    Some(v) => {
                        let e = self.add_eval(Expression, render(v), node_span(v), Some(v), &preds);
                        self.add(Return, format!("return {}", render(v)), span, &[e]);
                    }
                    None => {
                        self.add(Return, "return".into(), span, &preds);
                    }
                }
                Vec::new()
            }
            "IfStatement" => {
                let cond = &s["condition"];
                let c = self.add_eval(Conditional, format!("if({})", render(cond)), span, Some(cond), &preds);
                self.nodes[c].guard = Some(GuardRole::If(render(cond)));
                let mut exits = self.stmt(&s["trueBody"], vec![c]);
                match s.get("falseBody").filter(|v| !v.is_null()) {
                    Some(fb) => exits.extend(self.stmt(fb, vec![c])),
                    None => exits.push(c),
                }
                exits
            }
            "WhileStatement" => {
                let cond = &s["condition"];
                let l = self.add_eval(Loop, format!("while({})", render(cond)), span, Some(cond), &preds);
                self.loops.push(LoopCtx::default());
                let body_exits = self.stmt(&s["body"], vec![l]);
                let ctx = self.loops.pop().unwrap_or_default();
                for p in body_exits.into_iter().chain(ctx.continues) {
                    self.edges.push((p, l));
                }
                let mut exits = vec![l];
                exits.extend(ctx.breaks);
                exits
            }
            "DoWhileStatement" => {
                let body_start = self.nodes.len();
                self.loops.push(LoopCtx::default());
                let body_exits = self.stmt(&s["body"], preds.clone());
                let ctx = self.loops.pop().unwrap_or_default();
                let cond = &s["condition"];
                let mut lp: Vec<usize> = body_exits;
                lp.extend(ctx.continues);
                let created_body = self.nodes.len() > body_start;
                if !created_body {
                    lp.extend(preds.iter().copied());
                }
                let l = self.add_eval(Loop, format!("do-while({})", render(cond)), span, Some(cond), &lp);
                self.edges.push((l, if created_body { body_start } else { l }));
                let mut exits = vec![l];
                exits.extend(ctx.breaks);
                exits
            }
            "ForStatement" => {
                let mut p = preds;
                if let Some(init) = s.get("initializationExpression").filter(|v| !v.is_null()) {
                    p = self.stmt(init, p);
                }
                let cond = s.get("condition").filter(|v| !v.is_null());
                let cond_text = cond.map(render).unwrap_or_else(|| "true".into());
                let l = self.add_eval(Loop, format!("for({cond_text})"), span, cond, &p);
                self.loops.push(LoopCtx::default());
                let body_exits = self.stmt(&s["body"], vec![l]);
                let ctx = self.loops.pop().unwrap_or_default();
                let mut back: Vec<usize> = body_exits;
                back.extend(ctx.continues);
                match s.get("loopExpression").filter(|v| !v.is_null()) {
                    Some(le) => {
                        let e = &le["expression"];
                        let n = self.add_eval(Expression, render(e), node_span(le), Some(e), &back);
                        self.edges.push((n, l));
                    }
                    None => {
                        for b in back {
                            self.edges.push((b, l));
                        }
                    }
                }
                let mut exits = vec![l];
                exits.extend(ctx.breaks);
                exits
            }
            "Break" => {
                if let Some(ctx) = self.loops.last_mut() {
                    ctx.breaks.extend(preds);
                }
                Vec::new()
            }
            "Continue" => {
                if let Some(ctx) = self.loops.last_mut() {
                    ctx.continues.extend(preds);
                }
                Vec::new()
            }
            "TryStatement" => {
                let call = &s["externalCall"];
                let t = self.add_eval(Conditional, format!("try {}", render(call)), span, Some(call), &preds);
                let mut exits = Vec::new();
                for clause in s.get("clauses").and_then(Value::as_array).into_iter().flatten() {
                    exits.extend(self.stmt(&clause["block"], vec![t]));
                }
                if exits.is_empty() {
                    exits.push(t);
                }
                exits
            }
            "PlaceholderStatement" => vec![self.add(Expression, "_".into(), span, &preds)],
            "InlineAssembly" => vec![self.add(Expression, "assembly".into(), span, &preds)],
            other => vec![self.add(Expression, format!("<{other}>"), span, &preds)],
        }
    }

    fn expression_statement(&mut self, e: &Value, span: Option<Span>, preds: Vec<usize>) -> Vec<usize> {
        use CfgNodeKind::*;
        if node_type(e) == "FunctionCall" {
            let callee = &e["expression"];
            let name = if node_type(callee) == "Identifier" {
                callee.get("name").and_then(Value::as_str).unwrap_or("")
            } else {
                ""
            };
            let args: Vec<&Value> = e
                .get("arguments")
                .and_then(Value::as_array)
                .map(|a| a.iter().collect())
                .unwrap_or_default();
            match name {
                "require" | "assert" => {
                    let cond = args.first().map(|a| render(a)).unwrap_or_default();
                    let id = self.add_eval(Conditional, render(e), span, Some(e), &preds);
                    self.nodes[id].guard = Some(GuardRole::Require(cond));
                    return vec![id];
                }
                "revert" => {
                    let cond = args.iter().map(|a| render(a)).collect::<Vec<_>>().join(",");
                    let id = self.add_eval(Expression, render(e), span, Some(e), &preds);
                    self.nodes[id].guard = Some(GuardRole::Revert(cond));
                    return Vec::new();
                }
                _ => {}
            }
        }
        let kind = if expr::any_node(e, &|n| node_type(n) == "Conditional") {
            Conditional
        } else {
            Expression
        };
        vec![self.add_eval(kind, render(e), span, Some(e), &preds)]
    }
}

/// AST ids of every `FunctionCall` nested in `node`, in source order.
pub fn call_ids(node: &Value) -> Vec<i64> {
    let mut calls = Vec::new();
    expr::walk(node, &mut |n| {
        if node_type(n) == "FunctionCall" {
            if let Some(id) = node_id(n) {
                calls.push((node_span(n).unwrap_or_default(), id));
            }
        }
    });
    calls.sort();
    calls.into_iter().map(|(_, id)| id).collect()
}

fn root_identifier(node: &Value) -> Option<String> {
    match node_type(node) {
        "Identifier" => node.get("name").and_then(Value::as_str).map(str::to_string),
        "IndexAccess" => root_identifier(&node["baseExpression"]),
        "MemberAccess" => root_identifier(&node["expression"]),
        "TupleExpression" => None,
        _ => None,
    }
}

fn is_variable_identifier(n: &Value) -> bool {
    if node_type(n) != "Identifier" {
        return false;
    }
    let name = n.get("name").and_then(Value::as_str).unwrap_or("");
    if expr::is_builtin_namespace(name) || expr::is_builtin_function(name) {
        return false;
    }
    match type_string(n) {
        Some(t) => !(t.starts_with("function") || t.starts_with("type(") || t.starts_with("modifier")),
        None => true,
    }
}

/// Variables written and read by an expression.
fn def_use(e: &Value) -> (Vec<String>, Vec<String>) {
    let mut defs = BTreeSet::new();
    let mut pure_targets = BTreeSet::new();
    expr::walk(e, &mut |n| match node_type(n) {
        "Assignment" => {
            let lhs = &n["leftHandSide"];
            if node_type(lhs) == "TupleExpression" {
                for c in lhs.get("components").and_then(Value::as_array).into_iter().flatten() {
                    if let Some(r) = root_identifier(c) {
                        defs.insert(r);
                    }
                    if node_type(c) == "Identifier" {
                        pure_targets.insert(node_id(c));
                    }
                }
            } else if let Some(r) = root_identifier(lhs) {
                defs.insert(r);
                if node_type(lhs) == "Identifier" && n.get("operator").and_then(Value::as_str) == Some("=") {
                    pure_targets.insert(node_id(lhs));
                }
            }
        }
        "UnaryOperation" => {
            let op = n.get("operator").and_then(Value::as_str).unwrap_or("");
            if matches!(op, "++" | "--" | "delete") {
                if let Some(r) = root_identifier(&n["subExpression"]) {
                    defs.insert(r);
                }
            }
        }
        _ => {}
    });
    let mut uses = BTreeSet::new();
    expr::walk(e, &mut |n| {
        if is_variable_identifier(n) && !(node_id(n).is_some() && pure_targets.contains(&node_id(n))) {
            if let Some(name) = n.get("name").and_then(Value::as_str) {
                uses.insert(name.to_string());
            }
        }
    });
    (defs.into_iter().collect(), uses.into_iter().collect())
}

/// Builds the CFG of a function body. `None` (no implementation) yields a graph
/// with no nodes; an empty body yields the entry node alone.
pub fn build_cfg(body: Option<&[Value]>, params: &[String]) -> Cfg {
    let Some(stmts) = body else {
        return Cfg::default();
    };
    let mut b = Builder {
        nodes: Vec::new(),
        edges: Vec::new(),
        loops: Vec::new(),
    };
    let entry = b.add(CfgNodeKind::Entry, "entry".into(), None, &[]);
    b.nodes[entry].defs = params.to_vec();
    b.block(stmts, vec![entry]);
    prune(Cfg {
        nodes: b.nodes,
        edges: b.edges,
    })
}

fn prune(cfg: Cfg) -> Cfg {
    if cfg.nodes.is_empty() {
        return cfg;
    }
    let reach = cfg.reachable_from(Cfg::ENTRY);
    let remap: BTreeMap<usize, usize> = reach.iter().enumerate().map(|(new, old)| (*old, new)).collect();
    let nodes = cfg
        .nodes
        .into_iter()
        .filter_map(|mut n| {
            remap.get(&n.id).map(|new| {
                n.id = *new;
                n
            })
        })
        .collect();
    let mut edges: Vec<(usize, usize)> = cfg
        .edges
        .into_iter()
        .filter_map(|(a, b)| Some((*remap.get(&a)?, *remap.get(&b)?)))
        .collect();
    edges.sort();
    edges.dedup();
    Cfg { nodes, edges }
}

/// Reaching-definitions def-use edges over a CFG.
pub fn build_dfg(cfg: &Cfg) -> Dfg {
    let n = cfg.nodes.len();
    if n == 0 {
        return Dfg::default();
    }
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (a, b) in &cfg.edges {
        preds[*b].push(*a);
    }
    let mut out: Vec<BTreeSet<(String, usize)>> = vec![BTreeSet::new(); n];
    let mut changed = true;
    while changed {
        changed = false;
        for node in &cfg.nodes {
            let mut inset: BTreeSet<(String, usize)> = BTreeSet::new();
            for p in &preds[node.id] {
                inset.extend(out[*p].iter().cloned());
            }
            let mut o: BTreeSet<(String, usize)> = inset
                .into_iter()
                .filter(|(v, _)| !node.defs.contains(v))
                .collect();
            for d in &node.defs {
                o.insert((d.clone(), node.id));
            }
            if o != out[node.id] {
                out[node.id] = o;
                changed = true;
            }
        }
    }
    let mut edges = BTreeSet::new();
    for node in &cfg.nodes {
        let mut inset: BTreeSet<(String, usize)> = BTreeSet::new();
        for p in &preds[node.id] {
            inset.extend(out[*p].iter().cloned());
        }
        for u in &node.uses {
            for (v, d) in &inset {
                if v == u {
                    edges.insert(DefUse {
                        def: *d,
                        use_: node.id,
                        var: v.clone(),
                    });
                }
            }
        }
    }
    Dfg {
        edges: edges.into_iter().collect(),
    }
}
