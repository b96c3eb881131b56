//! Stage identifiers, verdicts and schema-checked parsing of stage answers.

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::prompts::{check_fields, json_objects, stage_schema};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Stage {
    C1,
    C2,
    C3,
    T1,
    T2,
    T3,
}

impl Stage {
    /// Template, schema and stage-tag id.
    pub fn id(self) -> &'static str {
        match self {
            Stage::C1 => "C1",
            Stage::C2 => "C2",
            Stage::C3 => "C3",
            Stage::T1 => "T1",
            Stage::T2 => "T2",
            Stage::T3 => "T3",
        }
    }

    pub fn is_targeted(self) -> bool {
        matches!(self, Stage::T1 | Stage::T2 | Stage::T3)
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Yes,
    No,
    Unknown,
}

impl Verdict {
    fn parse(s: &str) -> Option<Verdict> {
        match s.trim().to_ascii_lowercase().as_str() {
            "yes" => Some(Verdict::Yes),
            "no" => Some(Verdict::No),
            "unknown" => Some(Verdict::Unknown),
            _ => None,
        }
    }

    /// Gating decision; an `Unknown` answer does not let a usage through.
    pub fn is_yes(self) -> bool {
        self == Verdict::Yes
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageOutput {
    pub stage: Stage,
    pub verdict: Verdict,
    pub structured: Map<String, Value>,
    pub raw_text: String,
}

impl StageOutput {
    pub fn threats(&self) -> Vec<String> {
        string_list(self.structured.get("threats"))
    }
}

pub(crate) fn string_list(v: Option<&Value>) -> Vec<String> {
    v.and_then(Value::as_array)
        .map(|a| a.iter().filter_map(Value::as_str).map(str::to_string).collect())
        .unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("stage {stage} answer violates its schema: {problem}")]
pub struct StructureViolation {
    pub stage: Stage,
    pub problem: String,
}

/// Takes the first JSON object in `raw_text` that satisfies the stage schema.
pub fn parse_stage_response(raw_text: &str, stage: Stage) -> Result<StageOutput, StructureViolation> {
    let violation = |problem: String| StructureViolation { stage, problem };
    let schema = stage_schema(stage.id()).ok_or_else(|| violation("no schema registered".into()))?;
    let objects = json_objects(raw_text);
    if objects.is_empty() {
        return Err(violation("no JSON object in the answer".into()));
    }
    let mut first_problem = None;
    for obj in objects {
        let value = Value::Object(obj);
        let checked = check_fields(&schema["fields"], &value).and_then(|_| {
            let v = value["verdict"].as_str().unwrap_or_default();
            Verdict::parse(v).ok_or_else(|| format!("`verdict`: `{v}` is not Yes, No or Unknown"))
        });
        match checked {
            Ok(verdict) => {
                let Value::Object(structured) = value else { unreachable!() };
                return Ok(StageOutput {
                    stage,
                    verdict,
                    structured,
                    raw_text: raw_text.to_string(),
                });
            }
            Err(p) => {
                first_problem.get_or_insert(p);
            }
        }
    }
    Err(violation(first_problem.unwrap_or_default()))
}
