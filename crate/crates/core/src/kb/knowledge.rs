//! Comprehension prompts that turn tool output into usage knowledge.

use serde_json::{Map, Value};
use thiserror::Error;

use super::plan::COMPREHENSION_TEMPLATES;
use super::{ConstraintClass, ParamConstraint, ReturnCheck, UsageKnowledge};
use crate::features::CompositeSignature;
use crate::llm::{CompletionRequest, LlmBackend, LlmError};
use crate::prompts::{json_objects, render, uke_template};

#[derive(Debug, Error)]
pub enum KnowledgeError {
    #[error("backend unavailable: {0}")]
    BackendUnavailable(#[from] LlmError),
    #[error("response violates the `{template}` structure: {problem}")]
    StructureViolation { template: String, problem: String },
}

/// What the comprehension prompts know about one reusable function.
#[derive(Debug, Clone)]
pub struct FunctionBrief {
    pub signature: CompositeSignature,
    pub definition: String,
    /// `index: type name` lines.
    pub parameters: Vec<String>,
    pub returns: Vec<String>,
    pub bases: Vec<String>,
    pub source: String,
    /// Parsed tool results for this function.
    pub tools: String,
}

impl FunctionBrief {
    fn arity(&self) -> usize {
        self.parameters.len()
    }
}

pub fn comprehension_request(template_id: &str, brief: &FunctionBrief) -> CompletionRequest {
    let params = if brief.parameters.is_empty() {
        "(none)".to_string()
    } else {
        brief.parameters.join("\n")
    };
    let returns = if brief.returns.is_empty() {
        "(none)".to_string()
    } else {
        brief.returns.join(", ")
    };
    let bases = if brief.bases.is_empty() {
        "(none)".to_string()
    } else {
        brief.bases.join(", ")
    };
    let signature = brief.signature.render();
    let user = render(
        uke_template(template_id).unwrap_or_default(),
        &[
            ("definition", &brief.definition),
            ("signature", &signature),
            ("parameters", &params),
            ("returns", &returns),
            ("bases", &bases),
            ("source", &brief.source),
            ("tools", &brief.tools),
        ],
    );
    CompletionRequest::new(
        &format!("uke/{template_id}"),
        &render(uke_template("system").unwrap_or_default(), &[]),
        &user,
    )
}

/// Follow-up request after an unusable answer.
pub fn retry_request(first: &CompletionRequest, problem: &str) -> CompletionRequest {
    let user = render(
        uke_template("retry").unwrap_or_default(),
        &[("request", &first.user_text), ("problem", problem)],
    );
    CompletionRequest::new(&format!("{}/retry", first.stage_tag), &first.system_text, &user)
}

fn index_field(item: &Map<String, Value>, bound: usize, what: &str) -> Result<usize, String> {
    let i = item
        .get("index")
        .and_then(Value::as_u64)
        .ok_or_else(|| format!("{what} entry without a non-negative integer `index`"))? as usize;
    if i >= bound {
        return Err(format!("{what} index {i} out of range (count {bound})"));
    }
    Ok(i)
}

fn text_field(item: &Map<String, Value>, key: &str) -> Result<String, String> {
    item.get(key)
        .and_then(Value::as_str)
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .ok_or_else(|| format!("entry without a non-empty `{key}`"))
}

/// Parses one comprehension answer into a partial knowledge value.
pub fn parse_comprehension(template_id: &str, text: &str, brief: &FunctionBrief) -> Result<UsageKnowledge, String> {
    let key = match template_id {
        "param-constraints" => "param_constraints",
        "return-checks" => "return_checks",
        "override-obligations" => "override_obligations",
        other => return Err(format!("unknown template `{other}`")),
    };
    let block = json_objects(text)
        .into_iter()
        .find(|o| o.contains_key(key))
        .ok_or_else(|| format!("no JSON object with `{key}`"))?;
    let items = block
        .get(key)
        .and_then(Value::as_array)
        .ok_or_else(|| format!("`{key}` is not a list"))?;
    let mut k = UsageKnowledge {
        free_text_rationale: block
            .get("rationale")
            .and_then(Value::as_str)
            .unwrap_or("")
            .trim()
            .to_string(),
        ..UsageKnowledge::default()
    };
    for item in items {
        match template_id {
            "param-constraints" => {
                let obj = item.as_object().ok_or("constraint entry is not an object")?;
                let class = match obj.get("class").and_then(Value::as_str) {
                    Some("Range") => ConstraintClass::Range,
                    Some("Relation") => ConstraintClass::Relation,
                    Some("NonTrivial") => ConstraintClass::NonTrivial,
                    other => return Err(format!("unknown constraint class {other:?}")),
                };
                k.param_constraints.push(ParamConstraint {
                    param_index: index_field(obj, brief.arity(), "parameter")?,
                    constraint: text_field(obj, "constraint")?,
                    class,
                });
            }
            "return-checks" => {
                let obj = item.as_object().ok_or("check entry is not an object")?;
                k.return_checks.push(ReturnCheck {
                    return_index: index_field(obj, brief.returns.len(), "return")?,
                    check: text_field(obj, "check")?,
                });
            }
            _ => {
                let s = item
                    .as_str()
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .ok_or("obligation is not a non-empty string")?;
                k.override_obligations.push(s.to_string());
            }
        }
    }
    Ok(k)
}

/// Result of one comprehension prompt, retried once on a structure violation.
/// The outer error is a backend failure; the inner one a persistent structure violation.
pub fn run_comprehension(template_id: &str, brief: &FunctionBrief, backend: &dyn LlmBackend) -> Result<Result<UsageKnowledge, KnowledgeError>, LlmError> {
    let first = comprehension_request(template_id, brief);
    let text = backend.complete(&first)?;
    let problem = match parse_comprehension(template_id, &text, brief) {
        Ok(k) => return Ok(Ok(k)),
        Err(p) => p,
    };
    let text = backend.complete(&retry_request(&first, &problem))?;
    Ok(parse_comprehension(template_id, &text, brief).map_err(|problem| KnowledgeError::StructureViolation {
        template: template_id.to_string(),
        problem,
    }))
}

/// Runs the three comprehension prompts and merges their answers. Answers that
/// still violate the structure after one retry contribute nothing and are
/// reported as diagnostics; backend failures abort.
pub fn extract_usage_knowledge(brief: &FunctionBrief, backend: &dyn LlmBackend) -> Result<(UsageKnowledge, Vec<String>), KnowledgeError> {
    let mut merged = UsageKnowledge::default();
    let mut diagnostics = Vec::new();
    let mut rationale = Vec::new();
    for template in COMPREHENSION_TEMPLATES {
        match run_comprehension(template, brief, backend)? {
            Ok(k) => {
                merged.param_constraints.extend(k.param_constraints);
                merged.return_checks.extend(k.return_checks);
                merged.override_obligations.extend(k.override_obligations);
                if !k.free_text_rationale.is_empty() {
                    rationale.push(k.free_text_rationale);
                }
            }
            Err(e) => {
                log::warn!("{}: {e}", brief.signature);
                diagnostics.push(format!("{}: {e}", brief.signature));
            }
        }
    }
    merged.free_text_rationale = rationale.join(" ");
    Ok((merged, diagnostics))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::FnBackend;
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn brief() -> FunctionBrief {
        FunctionBrief {
            signature: CompositeSignature::new("SwapRouter", "swap", 2, "uint256"),
            definition: "SwapRouter.swap(uint256,uint256)".into(),
            parameters: vec!["0: uint256 amountIn".into(), "1: uint256 amountOutMin".into()],
            returns: vec!["uint256".into()],
            bases: vec![],
            source: "function swap(...) {}".into(),
            tools: "[]".into(),
        }
    }

    #[test]
    fn parses_each_template() {
        let b = brief();
        let p = parse_comprehension(
            "param-constraints",
            r#"Here: {"param_constraints":[{"index":1,"constraint":"scale with amountIn","class":"Relation"}],"rationale":"slippage"}"#,
            &b,
        )
        .unwrap();
        assert_eq!(p.param_constraints[0].class, ConstraintClass::Relation);
        let r = parse_comprehension("return-checks", r#"{"return_checks":[{"index":0,"check":"> 0"}]}"#, &b).unwrap();
        assert_eq!(r.return_checks.len(), 1);
        let o = parse_comprehension("override-obligations", r#"{"override_obligations":[]}"#, &b).unwrap();
        assert!(o.is_empty());
    }

    #[test]
    fn rejects_out_of_range_indices() {
        let b = brief();
        let err = parse_comprehension(
            "param-constraints",
            r#"{"param_constraints":[{"index":2,"constraint":"x","class":"Range"}]}"#,
            &b,
        );
        assert!(err.unwrap_err().contains("out of range"));
    }

    #[test]
    fn malformed_twice_degrades_to_empty() {
        let calls = AtomicUsize::new(0);
        let backend = FnBackend(|_: &CompletionRequest| {
            calls.fetch_add(1, Ordering::SeqCst);
            Ok("not json".to_string())
        });
        let (k, diags) = extract_usage_knowledge(&brief(), &backend).unwrap();
        assert!(k.is_empty());
        assert_eq!(diags.len(), 3);
        assert_eq!(calls.load(Ordering::SeqCst), 6);
    }

    #[test]
    fn retry_recovers() {
        let backend = FnBackend(|r: &CompletionRequest| {
            Ok(if r.stage_tag.ends_with("/retry") {
                let key = if r.stage_tag.contains("param") {
                    "param_constraints"
                } else if r.stage_tag.contains("return") {
                    "return_checks"
                } else {
                    "override_obligations"
                };
                format!("{{\"{key}\":[]}}")
            } else {
                "oops".to_string()
            })
        });
        let (_, diags) = extract_usage_knowledge(&brief(), &backend).unwrap();
        assert!(diags.is_empty());
    }

    #[test]
    fn backend_failure_aborts() {
        let backend = FnBackend(|_: &CompletionRequest| Err(LlmError::BackendUnavailable("down".into())));
        assert!(matches!(
            extract_usage_knowledge(&brief(), &backend),
            Err(KnowledgeError::BackendUnavailable(_))
        ));
    }
}
