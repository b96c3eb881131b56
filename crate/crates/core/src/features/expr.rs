//! Helpers over raw compiler AST nodes: compact expression rendering, type
//! canonicalization, and node traversal.

use serde_json::Value;

use super::model::Span;

pub fn node_type(node: &Value) -> &str {
    node.get("nodeType").and_then(Value::as_str).unwrap_or("")
}

pub fn node_id(node: &Value) -> Option<i64> {
    node.get("id").and_then(Value::as_i64)
}

pub fn node_span(node: &Value) -> Option<Span> {
    node.get("src").and_then(Value::as_str).and_then(Span::parse)
}

pub fn type_string(node: &Value) -> Option<&str> {
    node.get("typeDescriptions")?.get("typeString")?.as_str()
}

/// Declaration id referenced by an identifier or member access. The compiler
/// encodes builtin symbols with ids that overflow `i32`; those are reported as `None`.
pub fn referenced_declaration(node: &Value) -> Option<i64> {
    let id = node.get("referencedDeclaration")?.as_i64()?;
    (id >= 0 && id <= i32::MAX as i64).then_some(id)
}

/// Visits `node` and every AST node nested inside it, depth first. Children are
/// visited in key order, not source order; callers sort by span when order matters.
pub fn walk<'a>(node: &'a Value, visit: &mut dyn FnMut(&'a Value)) {
    match node {
        Value::Object(map) => {
            if map.contains_key("nodeType") {
                visit(node);
            }
            for v in map.values() {
                walk(v, visit);
            }
        }
        Value::Array(items) => items.iter().for_each(|v| walk(v, visit)),
        _ => {}
    }
}

pub fn any_node(node: &Value, pred: &dyn Fn(&Value) -> bool) -> bool {
    let mut found = false;
    walk(node, &mut |n| found |= pred(n));
    found
}

/// Canonical spelling of a Solidity type: data locations dropped, aliases
/// expanded (`uint` → `uint256`), user-defined types reduced to their bare name.
pub fn canonical_type(raw: &str) -> String {
    let mut s = raw.trim().to_string();
    for loc in [
        " storage pointer",
        " storage ref",
        " memory",
        " calldata",
        " storage",
        " pointer",
        " ref",
    ] {
        s = s.replace(loc, "");
    }
    for prefix in ["type(", "contract ", "struct ", "enum ", "library ", "user defined type "] {
        if let Some(rest) = s.strip_prefix(prefix) {
            s = rest.trim_end_matches(')').to_string();
        }
    }
    if s == "address payable" {
        s = "address".into();
    }
    // qualified user types `Lib.Struct` keep the last segment
    if !s.contains('(') && !s.contains(' ') {
        if let Some((_, last)) = s.rsplit_once('.') {
            s = last.to_string();
        }
    }
    match s.as_str() {
        "uint" => "uint256".into(),
        "int" => "int256".into(),
        "byte" => "bytes1".into(),
        "ufixed" => "ufixed128x18".into(),
        "fixed" => "fixed128x18".into(),
        _ => s.replace(' ', ""),
    }
}

/// Canonical return type: first return type, `void` for none, `tuple` for several.
pub fn canonical_return(types: &[String]) -> String {
    match types {
        [] => "void".into(),
        [single] => single.clone(),
        _ => "tuple".into(),
    }
}

/// Canonical return type derived from the type string of a call expression.
pub fn return_from_call_type(type_string: Option<&str>) -> String {
    match type_string {
        None => "void".into(),
        Some("tuple()") => "void".into(),
        Some(t) if t.starts_with("tuple(") => "tuple".into(),
        Some(t) => canonical_type(t),
    }
}

fn render_list(items: Option<&Value>) -> Vec<String> {
    items
        .and_then(Value::as_array)
        .map(|xs| xs.iter().map(render).collect())
        .unwrap_or_default()
}

fn type_name_text(node: &Value) -> String {
    match node {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => match node_type(other) {
            "ElementaryTypeName" => other["name"].as_str().unwrap_or("").to_string(),
            "UserDefinedTypeName" => other
                .get("pathNode")
                .and_then(|p| p.get("name"))
                .or_else(|| other.get("name"))
                .and_then(Value::as_str)
                .unwrap_or("")
                .to_string(),
            "ArrayTypeName" => {
                let base = type_name_text(&other["baseType"]);
                let len = other.get("length").filter(|l| !l.is_null()).map(render);
                format!("{base}[{}]", len.unwrap_or_default())
            }
            "Mapping" => format!(
                "mapping({}=>{})",
                type_name_text(&other["keyType"]),
                type_name_text(&other["valueType"])
            ),
            _ => type_string(other).map(canonical_type).unwrap_or_default(),
        },
    }
}

/// Renders an expression compactly (no padding around operators). Unknown node
/// kinds render as `<NodeType>`.
pub fn render(node: &Value) -> String {
    let s = |key: &str| node.get(key).and_then(Value::as_str).unwrap_or("");
    match node_type(node) {
        "Identifier" | "IdentifierPath" => s("name").to_string(),
        "Literal" => {
            let value = node.get("value").and_then(Value::as_str);
            let rendered = match s("kind") {
                "string" | "unicodeString" => format!("\"{}\"", value.unwrap_or("")),
                "hexString" => format!("hex\"{}\"", s("hexValue")),
                _ => value.unwrap_or(s("hexValue")).to_string(),
            };
            match node.get("subdenomination").and_then(Value::as_str) {
                Some(unit) => format!("{rendered} {unit}"),
                None => rendered,
            }
        }
        "BinaryOperation" => format!(
            "{}{}{}",
            render(&node["leftExpression"]),
            s("operator"),
            render(&node["rightExpression"])
        ),
        "UnaryOperation" => {
            let op = s("operator");
            let sub = render(&node["subExpression"]);
            if node.get("prefix").and_then(Value::as_bool).unwrap_or(true) {
                if op == "delete" {
                    format!("delete {sub}")
                } else {
                    format!("{op}{sub}")
                }
            } else {
                format!("{sub}{op}")
            }
        }
        "Assignment" => format!(
            "{}{}{}",
            render(&node["leftHandSide"]),
            s("operator"),
            render(&node["rightHandSide"])
        ),
        "MemberAccess" => format!("{}.{}", render(&node["expression"]), s("memberName")),
        "IndexAccess" => format!(
            "{}[{}]",
            render(&node["baseExpression"]),
            node.get("indexExpression")
                .filter(|v| !v.is_null())
                .map(render)
                .unwrap_or_default()
        ),
        "IndexRangeAccess" => {
            let part = |k: &str| {
                node.get(k)
                    .filter(|v| !v.is_null())
                    .map(render)
                    .unwrap_or_default()
            };
            format!(
                "{}[{}:{}]",
                render(&node["baseExpression"]),
                part("startExpression"),
                part("endExpression")
            )
        }
        "FunctionCall" => {
            let callee = render(&node["expression"]);
            let args = render_list(node.get("arguments"));
            let names: Vec<&str> = node
                .get("names")
                .and_then(Value::as_array)
                .map(|ns| ns.iter().filter_map(Value::as_str).collect())
                .unwrap_or_default();
            if !names.is_empty() && names.len() == args.len() {
                let pairs: Vec<String> = names
                    .iter()
                    .zip(&args)
                    .map(|(n, a)| format!("{n}:{a}"))
                    .collect();
                format!("{callee}({{{}}})", pairs.join(","))
            } else {
                format!("{callee}({})", args.join(","))
            }
        }
        "FunctionCallOptions" => {
            let names: Vec<&str> = node
                .get("names")
                .and_then(Value::as_array)
                .map(|ns| ns.iter().filter_map(Value::as_str).collect())
                .unwrap_or_default();
            let opts = render_list(node.get("options"));
            let pairs: Vec<String> = names
                .iter()
                .zip(&opts)
                .map(|(n, a)| format!("{n}:{a}"))
                .collect();
            format!("{}{{{}}}", render(&node["expression"]), pairs.join(","))
        }
        "TupleExpression" => {
            let parts: Vec<String> = node
                .get("components")
                .and_then(Value::as_array)
                .map(|cs| {
                    cs.iter()
                        .map(|c| if c.is_null() { String::new() } else { render(c) })
                        .collect()
                })
                .unwrap_or_default();
            if node.get("isInlineArray").and_then(Value::as_bool) == Some(true) {
                format!("[{}]", parts.join(","))
            } else {
                format!("({})", parts.join(","))
            }
        }
        "Conditional" => format!(
            "{}?{}:{}",
            render(&node["condition"]),
            render(&node["trueExpression"]),
            render(&node["falseExpression"])
        ),
        "ElementaryTypeNameExpression" => {
            let tn = type_name_text(&node["typeName"]);
            if tn.is_empty() {
                type_string(node)
                    .map(|t| {
                        t.trim_start_matches("type(")
                            .trim_end_matches(')')
                            .to_string()
                    })
                    .unwrap_or_default()
            } else {
                tn
            }
        }
        "NewExpression" => format!("new {}", type_name_text(&node["typeName"])),
        "VariableDeclaration" => {
            let ty = type_name_text(node.get("typeName").unwrap_or(&Value::Null));
            let ty = if ty.is_empty() {
                type_string(node).map(canonical_type).unwrap_or_default()
            } else {
                ty
            };
            format!("{ty} {}", s("name")).trim().to_string()
        }
        "" => String::new(),
        other => format!("<{other}>"),
    }
}

/// Collapses runs of whitespace to single spaces and trims.
pub fn normalize_ws(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Names of builtin functions that never produce call-graph edges.
pub fn is_builtin_function(name: &str) -> bool {
    matches!(
        name,
        "require"
            | "assert"
            | "revert"
            | "keccak256"
            | "sha256"
            | "ripemd160"
            | "ecrecover"
            | "addmod"
            | "mulmod"
            | "blockhash"
            | "blobhash"
            | "gasleft"
            | "selfdestruct"
            | "suicide"
            | "sha3"
            | "type"
    )
}

/// Identifier names bound to builtin namespaces (`abi.encode`, `msg.sender`).
pub fn is_builtin_namespace(name: &str) -> bool {
    matches!(
        name,
        "abi" | "msg" | "block" | "tx" | "this" | "super" | "bytes" | "string" | "address"
    )
}
