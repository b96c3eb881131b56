//! Detection of reusable-component usages: external calls, inheritance, and overriding.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::expr::canonical_return;
use super::graph::{CallKind, CompositeGraph};
use super::model::{ContractDecl, ContractModel, FunctionDecl, FunctionId, OverrideRef, Span};
use super::sequence::{extract_logical_sequence, LogicalSequence};
use super::signature::{extract_signature, function_display_name, CompositeSignature};
use super::embedding::{extract_embedding, StructuralEmbedding};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum UsageKind {
    Call,
    Inherit,
    Override,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum UsageGroup {
    #[serde(rename = "G_T")]
    Targeted,
    #[serde(rename = "G_O")]
    Comprehensive,
}

impl UsageKind {
    pub fn group(self) -> UsageGroup {
        match self {
            UsageKind::Call => UsageGroup::Targeted,
            UsageKind::Inherit | UsageKind::Override => UsageGroup::Comprehensive,
        }
    }
}

impl std::fmt::Display for UsageGroup {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            UsageGroup::Targeted => "G_T",
            UsageGroup::Comprehensive => "G_O",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageSite {
    pub contract: String,
    pub function: String,
    pub span: Span,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScrUsage {
    pub kind: UsageKind,
    pub group: UsageGroup,
    pub site: UsageSite,
    pub signature: CompositeSignature,
    pub sequence: LogicalSequence,
    pub embedding: StructuralEmbedding,
    /// Function of the business contract the usage is anchored in.
    pub anchor: Option<FunctionId>,
    /// `Contract.function(types)` of the reused function.
    pub definition: String,
    /// Contract providing the reused function.
    pub parent_contract: String,
    /// Name of the overridden function, `none` unless the usage overrides.
    pub overridden_function: String,
    /// Calls from the anchor function into other contracts, as `Contract.function`.
    pub related_calls: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub call_id: Option<i64>,
    /// Rendered source text of the usage site (call expression, base name, or function header).
    pub text: String,
}

fn definition_of(contract: &str, function: &FunctionDecl) -> String {
    let types: Vec<&str> = function.params.iter().map(|p| p.ty.as_str()).collect();
    format!("{contract}.{}({})", function_display_name(function), types.join(","))
}

fn related_calls(graph: &CompositeGraph, anchor: Option<&FunctionId>) -> Vec<String> {
    let Some(anchor) = anchor else {
        return Vec::new();
    };
    let set: BTreeSet<String> = graph
        .pcg
        .edges_from(anchor)
        .filter(|e| e.kind == CallKind::External)
        .map(|e| format!("{}.{}", e.target.contract, e.target.function))
        .collect();
    set.into_iter().collect()
}

fn anchor_embedding(model_fn: Option<(&FunctionDecl, &FunctionId)>, graph: &CompositeGraph) -> StructuralEmbedding {
    match model_fn {
        Some((f, id)) => extract_embedding(f, id, graph),
        None => StructuralEmbedding::bodiless(0, "void"),
    }
}

/// Lists every usage of a reusable component in the model's primary,
/// non-interface contracts, ordered by source position.
pub fn detect_scr_usages(model: &ContractModel, graph: &CompositeGraph) -> Vec<ScrUsage> {
    let mut usages = Vec::new();
    for contract in &model.contracts {
        if contract.is_interface || !model.is_primary(contract) {
            continue;
        }
        call_usages(model, graph, contract, &mut usages);
        inherit_usages(model, graph, contract, &mut usages);
        override_usages(model, graph, contract, &mut usages);
    }
    usages.sort_by(|a, b| {
        (a.site.span, a.kind, a.signature.render()).cmp(&(b.site.span, b.kind, b.signature.render()))
    });
    usages
}

fn line(model: &ContractModel, span: &Span) -> Option<usize> {
    model.line_of(span)
}

fn call_usages(model: &ContractModel, graph: &CompositeGraph, contract: &ContractDecl, out: &mut Vec<ScrUsage>) {
    for f in &contract.functions {
        let Some(caller_id) = graph.function_id(f.ast_id) else {
            continue;
        };
        let Some(cfg) = graph.cfg(caller_id) else {
            continue;
        };
        for edge in graph.pcg.edges_from(caller_id).filter(|e| e.kind == CallKind::External) {
            let t = &edge.target;
            let callee = model
                .contract(&t.contract)
                .and_then(|c| c.function(&t.function, t.arity).map(|f| (c, f)))
                .filter(|_| t.declared);
            let (embedding, definition) = match callee {
                Some((c, cf)) => (extract_embedding(cf, &edge.callee, graph), definition_of(&c.name, cf)),
                None => (
                    StructuralEmbedding::bodiless(t.arity, &t.return_type),
                    format!("{}.{}({})", t.contract, t.function, vec!["?"; t.arity].join(",")),
                ),
            };
            out.push(ScrUsage {
                kind: UsageKind::Call,
                group: UsageKind::Call.group(),
                site: UsageSite {
                    contract: contract.name.clone(),
                    function: function_display_name(f).to_string(),
                    span: edge.span,
                    line: line(model, &edge.span),
                },
                signature: CompositeSignature::new(&t.contract, &t.function, t.arity, &t.return_type),
                sequence: extract_logical_sequence(f, cfg, edge.call_id),
                embedding,
                anchor: Some(caller_id.clone()),
                definition,
                parent_contract: t.contract.clone(),
                overridden_function: "none".into(),
                related_calls: related_calls(graph, Some(caller_id)),
                call_id: Some(edge.call_id),
                text: edge.text.clone(),
            });
        }
    }
}

fn inherit_usages(model: &ContractModel, graph: &CompositeGraph, contract: &ContractDecl, out: &mut Vec<ScrUsage>) {
    let ctor = contract.constructor();
    let anchor = ctor.and_then(|c| graph.function_id(c.ast_id));
    let embedding = anchor_embedding(ctor.zip(anchor), graph);
    for (i, base) in contract.bases.iter().enumerate() {
        let base_ctor = model.contract(base).and_then(ContractDecl::constructor);
        let arity = base_ctor.map_or(0, FunctionDecl::arity);
        let span = contract.base_specs.get(i).map_or(contract.span, |b| b.span);
        out.push(ScrUsage {
            kind: UsageKind::Inherit,
            group: UsageKind::Inherit.group(),
            site: UsageSite {
                contract: contract.name.clone(),
                function: "constructor".into(),
                span,
                line: line(model, &span),
            },
            signature: CompositeSignature::new(base, "constructor", arity, "void"),
            sequence: LogicalSequence::default(),
            embedding,
            anchor: anchor.cloned(),
            definition: match base_ctor {
                Some(bc) => definition_of(base, bc),
                None => format!("{base}.constructor()"),
            },
            parent_contract: base.clone(),
            overridden_function: "none".into(),
            related_calls: related_calls(graph, anchor),
            call_id: None,
            text: format!("{} is {base}", contract.name),
        });
    }
}

fn override_usages(model: &ContractModel, graph: &CompositeGraph, contract: &ContractDecl, out: &mut Vec<ScrUsage>) {
    for f in &contract.functions {
        let Some(ov) = &f.overrides else {
            continue;
        };
        let Some(id) = graph.function_id(f.ast_id) else {
            continue;
        };
        let (base_name, base_fn) = match ov {
            OverrideRef::Resolved { base_contract, function } => {
                let decl = model.contract(base_contract).and_then(|c| {
                    c.function(function, f.arity())
                        .or_else(|| c.functions.iter().find(|g| &g.name == function))
                        .map(|g| (c, g))
                });
                (base_contract.clone(), decl)
            }
            OverrideRef::Unresolved => ("unknown".to_string(), None),
        };
        let (signature, definition) = match base_fn {
            Some((c, g)) => (extract_signature(g, c), definition_of(&c.name, g)),
            None => (
                CompositeSignature::new(&base_name, function_display_name(f), f.arity(), &canonical_return(&f.return_types)),
                definition_of(&base_name, f),
            ),
        };
        out.push(ScrUsage {
            kind: UsageKind::Override,
            group: UsageKind::Override.group(),
            site: UsageSite {
                contract: contract.name.clone(),
                function: function_display_name(f).to_string(),
                span: f.span,
                line: line(model, &f.span),
            },
            signature,
            sequence: LogicalSequence::default(),
            embedding: extract_embedding(f, id, graph),
            anchor: Some(id.clone()),
            definition,
            parent_contract: base_name,
            overridden_function: function_display_name(f).to_string(),
            related_calls: related_calls(graph, Some(id)),
            call_id: None,
            text: definition_of(&contract.name, f),
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::graph::build_composite_graph;
    use crate::features::model::*;

    #[test]
    fn internal_only_contract_has_no_usages() {
        let m = ContractModel {
            sources: vec![],
            contracts: vec![ContractDecl {
                ast_id: 1,
                name: "C".into(),
                kind: ContractKind::Contract,
                is_interface: false,
                bases: vec![],
                base_specs: vec![],
                linearized: vec![],
                functions: vec![],
                span: Span::default(),
            }],
        };
        let g = build_composite_graph(&m);
        assert!(detect_scr_usages(&m, &g).is_empty());
    }

    #[test]
    fn group_follows_kind() {
        assert_eq!(UsageKind::Call.group(), UsageGroup::Targeted);
        assert_eq!(UsageKind::Inherit.group(), UsageGroup::Comprehensive);
        assert_eq!(UsageKind::Override.group(), UsageGroup::Comprehensive);
    }
}
