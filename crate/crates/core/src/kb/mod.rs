//! Knowledge base of reusable components: source ingestion, the analysis
//! plan and plugin suite, usage-knowledge extraction, and JSON-lines storage.

pub mod builder;
pub mod knowledge;
pub mod plan;
pub mod plugins;
pub mod source;
pub mod store;

use serde::{Deserialize, Serialize};

use crate::features::{CompositeSignature, LogicalSequence, StructuralEmbedding};

pub use builder::{build_records, BuildError, KbBuildReport};
pub use knowledge::{extract_usage_knowledge, KnowledgeError};
pub use plan::{plan_tasks, SubTask, SubTaskKind};
pub use plugins::{invoke_plugin, PluginContext, PluginError, PluginId, PluginResult, ReturnShape};
pub use source::{ingest_sources, IngestError, IngestReport, Origin, ScrSourceUnit};
pub use store::{load_kb, store_kb, KbError, KnowledgeBase, KB_SCHEMA_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ConstraintClass {
    /// Bounds on a single value.
    Range,
    /// Coupling between a value and other inputs or state.
    Relation,
    /// A value must not be a trivial constant such as zero.
    NonTrivial,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamConstraint {
    pub param_index: usize,
    pub constraint: String,
    pub class: ConstraintClass,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReturnCheck {
    pub return_index: usize,
    pub check: String,
}

/// What a compliant caller, inheritor, or overrider must do.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageKnowledge {
    pub param_constraints: Vec<ParamConstraint>,
    pub return_checks: Vec<ReturnCheck>,
    pub override_obligations: Vec<String>,
    pub free_text_rationale: String,
}

impl UsageKnowledge {
    pub fn is_empty(&self) -> bool {
        self.param_constraints.is_empty() && self.return_checks.is_empty() && self.override_obligations.is_empty()
    }

    /// Compact text form used when the knowledge is quoted in prompts.
    pub fn summary(&self) -> String {
        let mut lines = Vec::new();
        for p in &self.param_constraints {
            lines.push(format!("param[{}] {:?}: {}", p.param_index, p.class, p.constraint));
        }
        for r in &self.return_checks {
            lines.push(format!("return[{}]: {}", r.return_index, r.check));
        }
        for o in &self.override_obligations {
            lines.push(format!("override: {o}"));
        }
        if lines.is_empty() {
            lines.push("no recorded usage constraints".into());
        }
        lines.join("\n")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScrRecord {
    pub id: String,
    pub signature: CompositeSignature,
    pub sequence: LogicalSequence,
    pub embedding: StructuralEmbedding,
    pub knowledge: UsageKnowledge,
    /// Id of the source unit the record was extracted from.
    pub provenance: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
}
