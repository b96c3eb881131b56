//! Versioned prompt templates, stage output schemas, and extraction of the
//! structured block from free-form model responses.

use serde_json::{Map, Value};

/// Knowledge-extraction templates, keyed by template id.
const UKE: [(&str, &str); 6] = [
    ("system", include_str!("../prompts/uke/system.txt")),
    ("param-constraints", include_str!("../prompts/uke/param-constraints.txt")),
    ("return-checks", include_str!("../prompts/uke/return-checks.txt")),
    ("override-obligations", include_str!("../prompts/uke/override-obligations.txt")),
    ("retry", include_str!("../prompts/uke/retry.txt")),
    ("tool_failure", include_str!("../prompts/uke/tool_failure.txt")),
];

/// Inspection templates, keyed by stage tag.
const LUV: [(&str, &str); 8] = [
    ("system", include_str!("../prompts/luv/system.txt")),
    ("T1", include_str!("../prompts/luv/t1.txt")),
    ("T2", include_str!("../prompts/luv/t2.txt")),
    ("T3", include_str!("../prompts/luv/t3.txt")),
    ("C1", include_str!("../prompts/luv/c1.txt")),
    ("C2", include_str!("../prompts/luv/c2.txt")),
    ("C3", include_str!("../prompts/luv/c3.txt")),
    ("retry", include_str!("../prompts/luv/retry.txt")),
];

const SCHEMAS: [(&str, &str); 6] = [
    ("T1", include_str!("../prompts/luv/schemas/t1.json")),
    ("T2", include_str!("../prompts/luv/schemas/t2.json")),
    ("T3", include_str!("../prompts/luv/schemas/t3.json")),
    ("C1", include_str!("../prompts/luv/schemas/c1.json")),
    ("C2", include_str!("../prompts/luv/schemas/c2.json")),
    ("C3", include_str!("../prompts/luv/schemas/c3.json")),
];

fn lookup(table: &[(&str, &'static str)], id: &str) -> Option<&'static str> {
    table.iter().find(|(k, _)| *k == id).map(|(_, v)| *v)
}

pub fn uke_template(id: &str) -> Option<&'static str> {
    lookup(&UKE, id)
}

/// Template used to turn a tool exception into prompt text; unknown ids fall
/// back to the generic tool-failure template.
pub fn uke_exception_template(id: &str) -> &'static str {
    uke_template(id).unwrap_or(UKE[5].1)
}

pub fn luv_template(stage: &str) -> Option<&'static str> {
    lookup(&LUV, stage)
}

pub fn stage_schema(stage: &str) -> Option<Value> {
    lookup(&SCHEMAS, stage).and_then(|s| serde_json::from_str(s).ok())
}

/// Version header (`# name vN`) of a template.
pub fn template_version(template: &str) -> Option<&str> {
    template.lines().next()?.strip_prefix("# ")
}

/// Substitutes `{{name}}` placeholders and drops the version header.
pub fn render(template: &str, vars: &[(&str, &str)]) -> String {
    let body = match template.split_once('\n') {
        Some((first, rest)) if first.starts_with("# ") => rest,
        _ => template,
    };
    let mut out = body.to_string();
    for (k, v) in vars {
        out = out.replace(&format!("{{{{{k}}}}}"), v);
    }
    out.trim_end().to_string()
}

/// Every JSON object embedded in `text`, in order of appearance. Objects
/// nested inside an earlier match are not reported separately.
pub fn json_objects(text: &str) -> Vec<Map<String, Value>> {
    let mut found = Vec::new();
    let mut i = 0;
    while let Some(off) = text[i..].find('{') {
        let start = i + off;
        let mut stream = serde_json::Deserializer::from_str(&text[start..]).into_iter::<Value>();
        match stream.next() {
            Some(Ok(Value::Object(obj))) => {
                found.push(obj);
                i = start + stream.byte_offset();
            }
            _ => i = start + 1,
        }
    }
    found
}

/// Checks `value` against a schema type: `verdict`, `string`, `string_list`,
/// `integer`, `scalar` (string or number), or `{"list_of": {field: type}}`.
pub fn check_type(ty: &Value, value: &Value) -> Result<(), String> {
    match ty {
        Value::String(t) => {
            let ok = match t.as_str() {
                "verdict" | "string" => value.is_string(),
                "string_list" => value.as_array().is_some_and(|a| a.iter().all(Value::is_string)),
                "integer" => value.is_u64() || value.is_i64(),
                "scalar" => value.is_string() || value.is_number(),
                other => return Err(format!("unknown schema type `{other}`")),
            };
            if ok {
                Ok(())
            } else {
                Err(format!("expected {t}, found {value}"))
            }
        }
        Value::Object(spec) => {
            let item = spec.get("list_of").ok_or("schema object without `list_of`")?;
            let items = value.as_array().ok_or_else(|| format!("expected a list, found {value}"))?;
            for (i, it) in items.iter().enumerate() {
                check_fields(item, it).map_err(|e| format!("item {i}: {e}"))?;
            }
            Ok(())
        }
        _ => Err("malformed schema".into()),
    }
}

/// Checks that every field of `fields` (a field → type map) is present with the right type.
pub fn check_fields(fields: &Value, value: &Value) -> Result<(), String> {
    let obj = value.as_object().ok_or("expected an object")?;
    let spec = fields.as_object().ok_or("malformed schema")?;
    for (name, ty) in spec {
        let v = obj.get(name).ok_or_else(|| format!("missing `{name}`"))?;
        check_type(ty, v).map_err(|e| format!("`{name}`: {e}"))?;
    }
    Ok(())
}
