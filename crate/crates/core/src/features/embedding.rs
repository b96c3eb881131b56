//! Structural embeddings: numeric summaries of a function body.

use serde::{Deserialize, Serialize};

use super::cfg::CfgCounts;
use super::expr::canonical_return;
use super::graph::{CallKind, CompositeGraph};
use super::model::{FunctionDecl, FunctionId};

/// Coarse class of a canonical return type, one-hot encoded in embeddings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReturnClass {
    Void,
    Bool,
    Uint,
    Int,
    Address,
    Bytes,
    String,
    Array,
    Tuple,
    Other,
}

impl ReturnClass {
    pub const ALL: [ReturnClass; 10] = [
        ReturnClass::Void,
        ReturnClass::Bool,
        ReturnClass::Uint,
        ReturnClass::Int,
        ReturnClass::Address,
        ReturnClass::Bytes,
        ReturnClass::String,
        ReturnClass::Array,
        ReturnClass::Tuple,
        ReturnClass::Other,
    ];

    pub fn of(return_type: &str) -> ReturnClass {
        let t = return_type.trim();
        if t.ends_with(']') {
            ReturnClass::Array
        } else if t == "void" {
            ReturnClass::Void
        } else if t == "tuple" {
            ReturnClass::Tuple
        } else if t == "bool" {
            ReturnClass::Bool
        } else if t.starts_with("uint") {
            ReturnClass::Uint
        } else if t.starts_with("int") {
            ReturnClass::Int
        } else if t == "address" {
            ReturnClass::Address
        } else if t.starts_with("bytes") {
            ReturnClass::Bytes
        } else if t == "string" {
            ReturnClass::String
        } else {
            ReturnClass::Other
        }
    }

    pub fn one_hot(self) -> [u32; 10] {
        let mut v = [0; 10];
        v[self as usize] = 1;
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasicAttrs {
    pub node_count: u32,
    pub param_count: u32,
    pub return_class: ReturnClass,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PcgAttrs {
    pub internal_call_count: u32,
    pub external_call_count: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuralEmbedding {
    pub basic: BasicAttrs,
    pub pcg_attrs: PcgAttrs,
    pub cfg_attrs: CfgCounts,
}

impl StructuralEmbedding {
    /// Embedding of a function whose body is unknown: only the interface-level
    /// fields are populated.
    pub fn bodiless(param_count: usize, return_type: &str) -> Self {
        StructuralEmbedding {
            basic: BasicAttrs {
                node_count: 0,
                param_count: param_count as u32,
                return_class: ReturnClass::of(return_type),
            },
            pcg_attrs: PcgAttrs::default(),
            cfg_attrs: CfgCounts::default(),
        }
    }

    /// `[node_count, param_count, internal, external, one-hot(10)]`.
    pub fn numeric_vector(&self) -> [f64; 14] {
        let mut v = [0.0; 14];
        v[0] = self.basic.node_count as f64;
        v[1] = self.basic.param_count as f64;
        v[2] = self.pcg_attrs.internal_call_count as f64;
        v[3] = self.pcg_attrs.external_call_count as f64;
        for (i, bit) in self.basic.return_class.one_hot().iter().enumerate() {
            v[4 + i] = *bit as f64;
        }
        v
    }

    pub fn control_vector(&self) -> [f64; 6] {
        self.cfg_attrs.as_array().map(f64::from)
    }
}

pub fn extract_embedding(function: &FunctionDecl, id: &FunctionId, graph: &CompositeGraph) -> StructuralEmbedding {
    let mut e = StructuralEmbedding::bodiless(function.arity(), &canonical_return(&function.return_types));
    if let Some(cfg) = graph.cfg(id) {
        e.cfg_attrs = cfg.counts();
        e.basic.node_count = cfg.nodes.len() as u32;
    }
    e.pcg_attrs = PcgAttrs {
        internal_call_count: graph.pcg.count_from(id, CallKind::Internal),
        external_call_count: graph.pcg.count_from(id, CallKind::External),
    };
    e
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::graph::build_composite_graph;
    use crate::features::model::*;
    use serde_json::json;

    fn model(body: Option<Vec<serde_json::Value>>) -> ContractModel {
        ContractModel {
            sources: vec![],
            contracts: vec![ContractDecl {
                ast_id: 1,
                name: "C".into(),
                kind: ContractKind::Contract,
                is_interface: body.is_none(),
                bases: vec![],
                base_specs: vec![],
                linearized: vec![],
                functions: vec![FunctionDecl {
                    ast_id: 2,
                    name: "add".into(),
                    kind: FunctionKind::Function,
                    params: vec![
                        Param { name: "a".into(), ty: "uint256".into() },
                        Param { name: "b".into(), ty: "uint256".into() },
                    ],
                    return_types: vec!["uint256".into()],
                    modifiers: vec![],
                    body_nodes: body,
                    overrides: None,
                    span: Span::default(),
                }],
                span: Span::default(),
            }],
        }
    }

    fn embed(m: &ContractModel) -> StructuralEmbedding {
        let g = build_composite_graph(m);
        let f = &m.contracts[0].functions[0];
        extract_embedding(f, &FunctionId::new("C", "add", 2), &g)
    }

    #[test]
    fn sum_body() {
        let body = vec![json!({"nodeType": "Return", "expression": {"nodeType": "BinaryOperation",
            "operator": "+", "leftExpression": {"nodeType": "Identifier", "name": "a"},
            "rightExpression": {"nodeType": "Identifier", "name": "b"}}})];
        let m = model(Some(body));
        let e = embed(&m);
        assert_eq!(e.cfg_attrs.as_array(), [1, 0, 1, 0, 0, 1]);
        assert_eq!(e.basic.node_count, 3);
        assert_eq!(e, embed(&m));
    }

    #[test]
    fn interface_is_bodiless() {
        let e = embed(&model(None));
        assert_eq!(e.basic.node_count, 0);
        assert_eq!(e.cfg_attrs.as_array(), [0; 6]);
        assert_eq!(e.basic.param_count, 2);
        assert_eq!(e.basic.return_class, ReturnClass::Uint);
    }

    #[test]
    fn return_classes() {
        assert_eq!(ReturnClass::of("uint256[]"), ReturnClass::Array);
        assert_eq!(ReturnClass::of("int8"), ReturnClass::Int);
        assert_eq!(ReturnClass::of("bytes32"), ReturnClass::Bytes);
        assert_eq!(ReturnClass::of("IERC20"), ReturnClass::Other);
        for c in ReturnClass::ALL {
            assert_eq!(c.one_hot().iter().sum::<u32>(), 1);
        }
    }
}
