//! Loading of compiler-emitted AST documents into a [`ContractModel`].

use std::collections::{BTreeMap, BTreeSet};

use semver::{Version, VersionReq};
use serde_json::Value;
use thiserror::Error;

use super::expr::{canonical_type, node_id, node_span, node_type, render, type_string};
use super::model::*;

#[derive(Debug, Error)]
pub enum AstError {
    #[error("malformed AST document: {0}")]
    MalformedAst(String),
    #[error("unsupported AST schema: {0}")]
    UnsupportedSchema(String),
}

/// Oldest and newest compiler series whose AST layout is understood.
pub const SUPPORTED_SERIES: (u64, u64) = (5, 8);

/// Parses AST JSON text. Accepts either the compiler's standard-json output
/// (`{"sources": {path: {"ast": ...}}}`) or a bare `SourceUnit` node.
pub fn load_contract_ast(document: &str) -> Result<ContractModel, AstError> {
    let value: Value =
        serde_json::from_str(document).map_err(|e| AstError::MalformedAst(e.to_string()))?;
    load_contract_ast_value(&value, &BTreeMap::new())
}

/// Same as [`load_contract_ast`] over a parsed value, attaching known source
/// texts (keyed by the unit's `absolutePath`) for line lookups.
pub fn load_contract_ast_value(
    value: &Value,
    texts: &BTreeMap<String, String>,
) -> Result<ContractModel, AstError> {
    let units = collect_units(value)?;
    for unit in &units {
        check_schema(unit)?;
    }

    let mut sources = Vec::new();
    let mut imported = BTreeSet::new();
    for (fallback_index, unit) in units.iter().enumerate() {
        let path = unit
            .get("absolutePath")
            .and_then(Value::as_str)
            .unwrap_or("")
            .to_string();
        let index = unit
            .get("src")
            .and_then(Value::as_str)
            .and_then(Span::parse)
            .map(|s| s.file)
            .unwrap_or(fallback_index as u32);
        for node in nodes_of(unit) {
            if node_type(node) == "ImportDirective" {
                if let Some(p) = node.get("absolutePath").and_then(Value::as_str) {
                    imported.insert(p.to_string());
                }
            }
        }
        sources.push(SourceFile {
            index,
            text: texts.get(&path).cloned(),
            path,
            primary: true,
        });
    }
    // Units nobody imports are the analysis targets; a closed import cycle leaves all primary.
    if sources.iter().any(|s| !imported.contains(&s.path)) {
        for s in &mut sources {
            s.primary = !imported.contains(&s.path);
        }
    }
    sources.sort_by_key(|s| s.index);

    let mut contracts = Vec::new();
    for unit in &units {
        for node in nodes_of(unit) {
            if node_type(node) == "ContractDefinition" {
                contracts.push(parse_contract(node)?);
            }
        }
    }
    let mut seen = BTreeSet::new();
    for c in &contracts {
        if !seen.insert(c.name.clone()) {
            return Err(AstError::MalformedAst(format!(
                "contract `{}` declared more than once",
                c.name
            )));
        }
    }
    contracts.sort_by_key(|c| c.span);
    let mut model = ContractModel { sources, contracts };
    resolve_overrides(&mut model);
    Ok(model)
}

fn collect_units(value: &Value) -> Result<Vec<&Value>, AstError> {
    if let Some(sources) = value.get("sources").and_then(Value::as_object) {
        let mut units = Vec::new();
        for (path, entry) in sources {
            let ast = entry
                .get("ast")
                .or_else(|| entry.get("legacyAST"))
                .ok_or_else(|| AstError::MalformedAst(format!("source `{path}` has no `ast`")))?;
            units.push(ast);
        }
        if units.is_empty() && value.get("errors").is_some() {
            return Err(AstError::MalformedAst(compiler_errors(value)));
        }
        return Ok(units);
    }
    if value.is_object() && (value.get("nodeType").is_some() || value.get("children").is_some()) {
        return Ok(vec![value]);
    }
    if value.get("errors").is_some() {
        return Err(AstError::MalformedAst(compiler_errors(value)));
    }
    Err(AstError::MalformedAst(
        "expected a SourceUnit or standard-json output".into(),
    ))
}

fn compiler_errors(value: &Value) -> String {
    value["errors"]
        .as_array()
        .map(|errs| {
            errs.iter()
                .filter_map(|e| e.get("formattedMessage").or_else(|| e.get("message")))
                .filter_map(Value::as_str)
                .collect::<Vec<_>>()
                .join("; ")
        })
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "compilation produced no AST".into())
}

fn nodes_of(node: &Value) -> impl Iterator<Item = &Value> {
    node.get("nodes")
        .and_then(Value::as_array)
        .map(|v| v.iter())
        .into_iter()
        .flatten()
}

fn check_schema(unit: &Value) -> Result<(), AstError> {
    if unit.get("nodeType").is_none() {
        if unit.get("children").is_some() {
            return Err(AstError::UnsupportedSchema(
                "legacy AST layout (name/children) predates 0.5".into(),
            ));
        }
        return Err(AstError::MalformedAst("node without `nodeType`".into()));
    }
    if node_type(unit) != "SourceUnit" {
        return Err(AstError::MalformedAst(format!(
            "expected SourceUnit, found `{}`",
            node_type(unit)
        )));
    }
    for node in nodes_of(unit) {
        if node_type(node) != "PragmaDirective" {
            continue;
        }
        let literals: Vec<&str> = node
            .get("literals")
            .and_then(Value::as_array)
            .map(|l| l.iter().filter_map(Value::as_str).collect())
            .unwrap_or_default();
        if literals.first() != Some(&"solidity") {
            continue;
        }
        let constraint = literals[1..].concat();
        if let Some(false) = pragma_admits_supported(&constraint) {
            return Err(AstError::UnsupportedSchema(format!(
                "pragma solidity {constraint} excludes 0.{}.x-0.{}.x",
                SUPPORTED_SERIES.0, SUPPORTED_SERIES.1
            )));
        }
    }
    Ok(())
}

/// Translates a Solidity version pragma (`^0.8.0`, `>=0.6.0<0.9.0`, `0.7.6`)
/// into semver requirements, one per `||` alternative.
pub fn parse_pragma(constraint: &str) -> Option<Vec<VersionReq>> {
    let re = regex::Regex::new(r"(\^|~|>=|<=|>|<|=)?\s*(\d+)(?:\.(\d+))?(?:\.(\d+))?").ok()?;
    let mut reqs = Vec::new();
    for alt in constraint.split("||") {
        let mut comparators = Vec::new();
        for cap in re.captures_iter(alt) {
            let op = cap.get(1).map(|m| m.as_str()).unwrap_or("=");
            let major = &cap[2];
            let minor = cap.get(3).map(|m| m.as_str()).unwrap_or("0");
            let patch = cap.get(4).map(|m| m.as_str()).unwrap_or("0");
            comparators.push(format!("{op}{major}.{minor}.{patch}"));
        }
        if comparators.is_empty() {
            return None;
        }
        reqs.push(VersionReq::parse(&comparators.join(", ")).ok()?);
    }
    Some(reqs)
}

/// Every released compiler version a pragma could be satisfied by, restricted
/// to the series we probe (0.4 through 0.9).
fn probe_versions() -> impl Iterator<Item = Version> {
    (4u64..=9).flat_map(|minor| (0u64..=40).map(move |patch| Version::new(0, minor, patch)))
}

/// `Some(true)` when the pragma admits a supported compiler series, `Some(false)`
/// when it admits only unsupported ones, `None` when it cannot be read.
pub fn pragma_admits_supported(constraint: &str) -> Option<bool> {
    let reqs = parse_pragma(constraint)?;
    let (lo, hi) = SUPPORTED_SERIES;
    Some(probe_versions().any(|v| {
        v.minor >= lo && v.minor <= hi && reqs.iter().any(|r| r.matches(&v))
    }))
}

fn parse_contract(node: &Value) -> Result<ContractDecl, AstError> {
    let name = node
        .get("name")
        .and_then(Value::as_str)
        .ok_or_else(|| AstError::MalformedAst("contract without name".into()))?
        .to_string();
    let kind_str = node.get("contractKind").and_then(Value::as_str).unwrap_or("contract");
    let is_abstract = node.get("abstract").and_then(Value::as_bool).unwrap_or(false);
    let kind = match kind_str {
        "interface" => ContractKind::Interface,
        "library" => ContractKind::Library,
        _ if is_abstract => ContractKind::Abstract,
        _ => ContractKind::Contract,
    };

    let mut base_specs = Vec::new();
    for spec in node
        .get("baseContracts")
        .and_then(Value::as_array)
        .into_iter()
        .flatten()
    {
        let base_name = &spec["baseName"];
        let name = base_name
            .get("name")
            .or_else(|| base_name.get("namePath"))
            .and_then(Value::as_str)
            .unwrap_or("")
            .rsplit('.')
            .next()
            .unwrap_or("")
            .to_string();
        let arg_count = spec
            .get("arguments")
            .and_then(Value::as_array)
            .map(Vec::len);
        base_specs.push(BaseSpec {
            name,
            span: node_span(spec).unwrap_or_default(),
            arg_count,
        });
    }

    let mut functions = Vec::new();
    for child in nodes_of(node) {
        if node_type(child) == "FunctionDefinition" {
            functions.push(parse_function(child)?);
        }
    }

    // Linearized ids are resolved to names once all contracts are known; keep ids for now.
    let linearized_ids: Vec<i64> = node
        .get("linearizedBaseContracts")
        .and_then(Value::as_array)
        .map(|l| l.iter().filter_map(Value::as_i64).collect())
        .unwrap_or_default();

    Ok(ContractDecl {
        ast_id: node_id(node).unwrap_or(-1),
        is_interface: kind == ContractKind::Interface,
        bases: base_specs.iter().map(|b| b.name.clone()).collect(),
        base_specs,
        linearized: linearized_ids.iter().map(|id| format!("#{id}")).collect(),
        functions,
        span: node_span(node).unwrap_or_default(),
        name,
        kind,
    })
}

fn param_list(node: &Value, key: &str) -> Vec<Param> {
    node.get(key)
        .and_then(|p| p.get("parameters"))
        .and_then(Value::as_array)
        .map(|ps| {
            ps.iter()
                .map(|p| Param {
                    name: p.get("name").and_then(Value::as_str).unwrap_or("").to_string(),
                    ty: type_string(p).map(canonical_type).unwrap_or_else(|| "unknown".into()),
                })
                .collect()
        })
        .unwrap_or_default()
}

fn parse_function(node: &Value) -> Result<FunctionDecl, AstError> {
    let kind = match node.get("kind").and_then(Value::as_str) {
        Some("constructor") => FunctionKind::Constructor,
        Some("fallback") => FunctionKind::Fallback,
        Some("receive") => FunctionKind::Receive,
        Some(_) => FunctionKind::Function,
        // 0.5 layout: `isConstructor` flag, empty name for fallback
        None => {
            if node.get("isConstructor").and_then(Value::as_bool) == Some(true) {
                FunctionKind::Constructor
            } else if node.get("name").and_then(Value::as_str) == Some("") {
                FunctionKind::Fallback
            } else {
                FunctionKind::Function
            }
        }
    };
    let name = match kind {
        FunctionKind::Constructor => "constructor".to_string(),
        FunctionKind::Fallback => "fallback".to_string(),
        FunctionKind::Receive => "receive".to_string(),
        FunctionKind::Function => node
            .get("name")
            .and_then(Value::as_str)
            .unwrap_or("")
            .to_string(),
    };

    let mut modifiers = Vec::new();
    for m in node
        .get("modifiers")
        .and_then(Value::as_array)
        .into_iter()
        .flatten()
    {
        if m.get("kind").and_then(Value::as_str) == Some("baseConstructorSpecifier") {
            continue;
        }
        let mname = render(&m["modifierName"]);
        let args: Vec<String> = m
            .get("arguments")
            .and_then(Value::as_array)
            .map(|a| a.iter().map(render).collect())
            .unwrap_or_default();
        let condition = if args.is_empty() {
            mname.clone()
        } else {
            format!("{mname}({})", args.join(","))
        };
        modifiers.push(ModifierUse {
            name: mname,
            condition,
        });
    }

    let body_nodes = node
        .get("body")
        .filter(|b| !b.is_null())
        .map(|b| b.get("statements").and_then(Value::as_array).cloned().unwrap_or_default());

    // Marker only; targets are resolved against the whole model afterwards.
    let base_ids: Vec<i64> = node
        .get("baseFunctions")
        .and_then(Value::as_array)
        .map(|b| b.iter().filter_map(Value::as_i64).collect())
        .or_else(|| node.get("superFunction").and_then(Value::as_i64).map(|id| vec![id]))
        .unwrap_or_default();
    let marked = node.get("overrides").is_some_and(|o| !o.is_null()) || !base_ids.is_empty();
    let overrides = marked.then(|| {
        // stash the first base function id until resolution
        match base_ids.first() {
            Some(id) => OverrideRef::Resolved {
                base_contract: String::new(),
                function: format!("#{id}"),
            },
            None => OverrideRef::Unresolved,
        }
    });

    Ok(FunctionDecl {
        ast_id: node_id(node).unwrap_or(-1),
        name,
        kind,
        params: param_list(node, "parameters"),
        return_types: param_list(node, "returnParameters")
            .into_iter()
            .map(|p| p.ty)
            .collect(),
        modifiers,
        body_nodes,
        overrides,
        span: node_span(node).unwrap_or_default(),
    })
}

/// Replaces placeholder ids left by the parser (linearization and override
/// targets) with names, and marks overrides whose base is not in the model.
fn resolve_overrides(model: &mut ContractModel) {
    let contract_names: BTreeMap<String, String> = model
        .contracts
        .iter()
        .map(|c| (format!("#{}", c.ast_id), c.name.clone()))
        .collect();
    let function_owner: BTreeMap<String, (String, String)> = model
        .functions()
        .map(|r| {
            (
                format!("#{}", r.function.ast_id),
                (r.contract.name.clone(), r.function.name.clone()),
            )
        })
        .collect();

    for contract in &mut model.contracts {
        let resolved: Vec<String> = contract
            .linearized
            .iter()
            .filter_map(|id| contract_names.get(id).cloned())
            .collect();
        // A partially resolvable linearization (bases outside the model) is
        // replaced by the declared-bases walk in `ContractModel::hierarchy`.
        contract.linearized = if resolved.len() == contract.linearized.len() {
            resolved
        } else {
            Vec::new()
        };
    }

    let hierarchies: BTreeMap<String, Vec<String>> = model
        .contracts
        .iter()
        .map(|c| (c.name.clone(), model.hierarchy(&c.name)))
        .collect();

    let all_contracts: BTreeSet<String> = model.contracts.iter().map(|c| c.name.clone()).collect();
    for contract in &mut model.contracts {
        let ancestors = &hierarchies[&contract.name];
        // pre-0.8 layouts list base constructor calls among modifiers without a `kind`
        for f in &mut contract.functions {
            f.modifiers.retain(|m| !all_contracts.contains(&m.name));
        }
        for f in &mut contract.functions {
            if let Some(OverrideRef::Resolved { function, .. }) = &f.overrides {
                f.overrides = Some(match function_owner.get(function) {
                    Some((base, fname)) if ancestors.contains(base) => OverrideRef::Resolved {
                        base_contract: base.clone(),
                        function: fname.clone(),
                    },
                    _ => OverrideRef::Unresolved,
                });
            }
        }
    }
}

/// Lowest compiler series a pragma admits, for compiler selection.
pub fn pragma_series(constraint: &str) -> Option<(u64, u64)> {
    let reqs = parse_pragma(constraint)?;
    probe_versions()
        .find(|v| reqs.iter().any(|r| r.matches(v)))
        .map(|v| (v.major, v.minor))
}

/// The `pragma solidity` constraint of a source text, if present.
pub fn source_pragma(source: &str) -> Option<String> {
    let re = regex::Regex::new(r"pragma\s+solidity\s+([^;]+);").ok()?;
    re.captures(source).map(|c| c[1].trim().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn empty_source_unit_has_no_contracts() {
        let doc = json!({"nodeType": "SourceUnit", "absolutePath": "e.sol", "src": "0:0:0", "nodes": []});
        let model = load_contract_ast(&doc.to_string()).unwrap();
        assert!(model.contracts.is_empty());
        assert_eq!(model.sources.len(), 1);
    }

    #[test]
    fn unreadable_document_is_malformed() {
        assert!(matches!(
            load_contract_ast("{not json"),
            Err(AstError::MalformedAst(_))
        ));
        assert!(matches!(
            load_contract_ast("[1,2]"),
            Err(AstError::MalformedAst(_))
        ));
    }

    #[test]
    fn legacy_layout_is_unsupported() {
        let doc = json!({"name": "SourceUnit", "children": [], "attributes": {}});
        assert!(matches!(
            load_contract_ast(&doc.to_string()),
            Err(AstError::UnsupportedSchema(_))
        ));
    }

    #[test]
    fn old_pragma_is_unsupported() {
        let doc = json!({"nodeType": "SourceUnit", "src": "0:0:0", "nodes": [
            {"nodeType": "PragmaDirective", "literals": ["solidity", "^", "0.4", ".24"]}
        ]});
        assert!(matches!(
            load_contract_ast(&doc.to_string()),
            Err(AstError::UnsupportedSchema(_))
        ));
    }

    #[test]
    fn pragma_ranges() {
        assert_eq!(pragma_admits_supported("^0.8.0"), Some(true));
        assert_eq!(pragma_admits_supported(">=0.4.22<0.6.0"), Some(true));
        assert_eq!(pragma_admits_supported("0.4.24"), Some(false));
        assert_eq!(pragma_admits_supported("^0.9.0"), Some(false));
        assert_eq!(pragma_series(">=0.6.2<0.9.0"), Some((0, 6)));
        assert_eq!(source_pragma("// x\npragma solidity ^0.8.0;\n").as_deref(), Some("^0.8.0"));
    }

    #[test]
    fn compiler_error_output_is_malformed() {
        let doc = json!({"errors": [{"severity": "error", "formattedMessage": "ParserError: boom"}]});
        match load_contract_ast(&doc.to_string()) {
            Err(AstError::MalformedAst(msg)) => assert!(msg.contains("boom")),
            other => panic!("unexpected {other:?}"),
        }
    }
}
