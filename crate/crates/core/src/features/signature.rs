//! Composite signatures: the four-item identity key of a reusable-component function.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::expr::canonical_return;
use super::model::{ContractDecl, FunctionDecl, FunctionKind};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CompositeSignature {
    pub contract_name: String,
    pub function_name: String,
    pub param_count: usize,
    pub return_type: String,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SignatureParseError {
    #[error("expected 4 `-`-separated items, found {0}")]
    ItemCount(usize),
    #[error("parameter count `{0}` is not a non-negative integer")]
    ParamCount(String),
}

fn sanitize(s: &str) -> String {
    s.replace('-', "_")
}

impl CompositeSignature {
    /// Builds a signature, replacing `-` inside names with `_` so the rendered
    /// form stays unambiguous.
    pub fn new(contract: &str, function: &str, param_count: usize, return_type: &str) -> Self {
        CompositeSignature {
            contract_name: sanitize(contract),
            function_name: sanitize(function),
            param_count,
            return_type: sanitize(return_type),
        }
    }

    /// The four items as strings, in weight order.
    pub fn items(&self) -> [String; 4] {
        [
            self.contract_name.clone(),
            self.function_name.clone(),
            self.param_count.to_string(),
            self.return_type.clone(),
        ]
    }

    pub fn render(&self) -> String {
        self.to_string()
    }

    pub fn parse(rendered: &str) -> Result<Self, SignatureParseError> {
        rendered.parse()
    }
}

impl fmt::Display for CompositeSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}-{}-{}-{}",
            sanitize(&self.contract_name),
            sanitize(&self.function_name),
            self.param_count,
            sanitize(&self.return_type)
        )
    }
}

impl FromStr for CompositeSignature {
    type Err = SignatureParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split('-').collect();
        if parts.len() != 4 {
            return Err(SignatureParseError::ItemCount(parts.len()));
        }
        let count = parts[2]
            .parse::<usize>()
            .ok()
            .filter(|_| parts[2].bytes().all(|b| b.is_ascii_digit()))
            .ok_or_else(|| SignatureParseError::ParamCount(parts[2].to_string()))?;
        Ok(CompositeSignature::new(parts[0], parts[1], count, parts[3]))
    }
}

/// Display name of a function inside signatures; special functions use their kind.
pub fn function_display_name(function: &FunctionDecl) -> &str {
    match function.kind {
        FunctionKind::Constructor => "constructor",
        FunctionKind::Fallback => "fallback",
        FunctionKind::Receive => "receive",
        FunctionKind::Function => &function.name,
    }
}

pub fn extract_signature(function: &FunctionDecl, owner: &ContractDecl) -> CompositeSignature {
    CompositeSignature::new(
        &owner.name,
        function_display_name(function),
        function.arity(),
        &canonical_return(&function.return_types),
    )
}
