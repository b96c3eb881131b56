//! Detection of logic-level usage violations of smart contract reusable components.
//!
//! Usages of reusable components are extracted from compiled contracts,
//! matched against a knowledge base of reference records, inspected in stages
//! by a language model, and confirmed by a similarity checker and a
//! snapshot-conflict filter.

pub mod config;
pub mod detection;
pub mod features;
pub mod inspector;
pub mod kb;
pub mod llm;
pub mod pipeline;
pub mod prompts;
pub mod report;
pub mod retrieval;
pub mod util;

pub use config::{BackendKind, RunConfig, WeightsMode};
pub use detection::{CheckerParams, FinalVerdict, SimilarityScores, SweepReport, ViolationVerdict};
pub use features::{CompositeSignature, LogicalSequence, ScrUsage, StructuralEmbedding, UsageGroup, UsageKind};
pub use inspector::{Finding, Phase, Snapshot, SnapshotRepository};
pub use kb::{KnowledgeBase, ScrRecord};
pub use llm::{CompletionRequest, LlmBackend, LlmError};
pub use pipeline::{analyze_model, Analyzer, PipelineError};
pub use report::{AnalysisReport, ContractReport, Summary};
pub use retrieval::SignatureWeights;
