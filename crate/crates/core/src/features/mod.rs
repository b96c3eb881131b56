//! Feature extraction: compiler AST ingestion, composite program graph, and
//! the three usage representations (composite signature, logical sequence,
//! structural embedding).

pub mod ast;
pub mod cfg;
pub mod compiler;
pub mod embedding;
pub mod expr;
pub mod graph;
pub mod model;
pub mod sequence;
pub mod signature;
pub mod usage;

pub use ast::{load_contract_ast, AstError};
pub use cfg::{Cfg, CfgCounts, CfgNodeKind, Dfg};
pub use compiler::{load_contract, CompileError, PrecompiledAst, SolcCommand, SolidityCompiler};
pub use embedding::{extract_embedding, ReturnClass, StructuralEmbedding};
pub use graph::{build_composite_graph, CallKind, CompositeGraph};
pub use model::{ContractDecl, ContractModel, FunctionDecl, FunctionId, Span};
pub use sequence::{extract_logical_sequence, function_guard_sequence, ConstraintKind, LogicalConstraint, LogicalSequence};
pub use signature::{extract_signature, CompositeSignature};
pub use usage::{detect_scr_usages, ScrUsage, UsageGroup, UsageKind, UsageSite};
