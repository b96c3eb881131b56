use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Byte range inside a compiled source file, as encoded by the compiler's `src` attribute.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub file: u32,
    pub start: u32,
    pub length: u32,
}

impl Span {
    /// Parses `start:length:file`. Negative components (used by the compiler for
    /// synthetic nodes) collapse to zero.
    pub fn parse(src: &str) -> Option<Span> {
        let mut parts = src.split(':').map(|p| p.parse::<i64>().ok());
        let start = parts.next()??;
        let length = parts.next()??;
        let file = parts.next().flatten().unwrap_or(0);
        Some(Span {
            file: file.max(0) as u32,
            start: start.max(0) as u32,
            length: length.max(0) as u32,
        })
    }

    pub fn end(&self) -> u32 {
        self.start + self.length
    }

    pub fn contains(&self, other: &Span) -> bool {
        self.file == other.file && self.start <= other.start && other.end() <= self.end()
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.start, self.length, self.file)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceFile {
    pub index: u32,
    pub path: String,
    /// Target of the analysis, as opposed to an imported dependency.
    pub primary: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

impl SourceFile {
    /// 1-based line number of a byte offset, when the source text is known.
    pub fn line_of(&self, offset: u32) -> Option<usize> {
        let text = self.text.as_ref()?;
        let offset = (offset as usize).min(text.len());
        Some(text.as_bytes()[..offset].iter().filter(|b| **b == b'\n').count() + 1)
    }

    pub fn slice(&self, span: &Span) -> Option<&str> {
        let text = self.text.as_ref()?;
        text.get(span.start as usize..span.end() as usize)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContractKind {
    Contract,
    Abstract,
    Library,
    Interface,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionKind {
    Function,
    Constructor,
    Fallback,
    Receive,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: String,
}

/// A modifier applied to a function, with its rendered invocation text
/// (`onlyOwner`, `onlyRole(MINTER)`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModifierUse {
    pub name: String,
    pub condition: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum OverrideRef {
    Resolved { base_contract: String, function: String },
    Unresolved,
}

/// Explicit base-contract reference in an inheritance list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaseSpec {
    pub name: String,
    pub span: Span,
    /// Constructor arguments supplied inline (`is Base(1e27)`), if any.
    pub arg_count: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionDecl {
    pub ast_id: i64,
    pub name: String,
    pub kind: FunctionKind,
    pub params: Vec<Param>,
    pub return_types: Vec<String>,
    pub modifiers: Vec<ModifierUse>,
    /// Statements of the body; `None` for declarations without an implementation.
    pub body_nodes: Option<Vec<Value>>,
    pub overrides: Option<OverrideRef>,
    pub span: Span,
}

impl FunctionDecl {
    pub fn arity(&self) -> usize {
        self.params.len()
    }

    pub fn has_body(&self) -> bool {
        self.body_nodes.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractDecl {
    pub ast_id: i64,
    pub name: String,
    pub kind: ContractKind,
    pub is_interface: bool,
    /// Direct bases in declaration order.
    pub bases: Vec<String>,
    pub base_specs: Vec<BaseSpec>,
    /// C3 linearization as reported by the compiler, most derived first.
    pub linearized: Vec<String>,
    pub functions: Vec<FunctionDecl>,
    pub span: Span,
}

impl ContractDecl {
    pub fn function(&self, name: &str, arity: usize) -> Option<&FunctionDecl> {
        self.functions
            .iter()
            .find(|f| f.name == name && f.arity() == arity)
    }

    pub fn constructor(&self) -> Option<&FunctionDecl> {
        self.functions
            .iter()
            .find(|f| f.kind == FunctionKind::Constructor)
    }
}

/// Stable identifier of a function node: `Contract.name/arity`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FunctionId(pub String);

impl FunctionId {
    pub fn new(contract: &str, function: &str, arity: usize) -> Self {
        FunctionId(format!("{contract}.{function}/{arity}"))
    }

    pub fn contract(&self) -> &str {
        self.0.split('.').next().unwrap_or("")
    }
}

impl fmt::Display for FunctionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ContractModel {
    pub sources: Vec<SourceFile>,
    pub contracts: Vec<ContractDecl>,
}

/// Location of a declared function inside a model.
#[derive(Debug, Clone, Copy)]
pub struct FunctionRef<'a> {
    pub contract: &'a ContractDecl,
    pub function: &'a FunctionDecl,
}

impl<'a> FunctionRef<'a> {
    pub fn id(&self) -> FunctionId {
        FunctionId::new(&self.contract.name, &self.function.name, self.function.arity())
    }
}

impl ContractModel {
    pub fn contract(&self, name: &str) -> Option<&ContractDecl> {
        self.contracts.iter().find(|c| c.name == name)
    }

    pub fn source(&self, index: u32) -> Option<&SourceFile> {
        self.sources.iter().find(|s| s.index == index)
    }

    pub fn is_primary(&self, contract: &ContractDecl) -> bool {
        self.source(contract.span.file)
            .map(|s| s.primary)
            .unwrap_or(true)
    }

    pub fn functions(&self) -> impl Iterator<Item = FunctionRef<'_>> {
        self.contracts.iter().flat_map(|c| {
            c.functions.iter().map(move |f| FunctionRef {
                contract: c,
                function: f,
            })
        })
    }

    /// Index of declared functions by compiler AST id.
    pub fn function_index(&self) -> BTreeMap<i64, FunctionRef<'_>> {
        self.functions().map(|r| (r.function.ast_id, r)).collect()
    }

    /// Contracts `name` inherits from, itself included, most derived first.
    /// Falls back to a breadth-first walk of declared bases when the compiler
    /// linearization is unavailable.
    pub fn hierarchy(&self, name: &str) -> Vec<String> {
        let Some(contract) = self.contract(name) else {
            return vec![name.to_string()];
        };
        if !contract.linearized.is_empty() {
            return contract.linearized.clone();
        }
        let mut out = vec![name.to_string()];
        let mut cursor = 0;
        while cursor < out.len() {
            if let Some(c) = self.contract(&out[cursor].clone()) {
                for base in &c.bases {
                    if !out.contains(base) {
                        out.push(base.clone());
                    }
                }
            }
            cursor += 1;
        }
        out
    }

    pub fn line_of(&self, span: &Span) -> Option<usize> {
        self.source(span.file)?.line_of(span.start)
    }
}
