//! Helpers shared by the integration tests that run on the recorded fixtures.

#![allow(dead_code)]

use std::path::PathBuf;

use scrcheck_core::detection::CheckerParams;
use scrcheck_core::features::compiler::compile_to_model;
use scrcheck_core::features::PrecompiledAst;
use scrcheck_core::inspector::{
    feature_snapshot_payload, inspect_contract, ContractContext, Finding, Inspector, Phase, SnapshotRepository,
};
use scrcheck_core::kb::load_kb;
use scrcheck_core::llm::{LlmBackend, ReplayBackend};
use scrcheck_core::pipeline::{analyze_model, primary_source, Analyzer};
use scrcheck_core::retrieval::infer_signature_weights;
use scrcheck_core::{ContractReport, KnowledgeBase, SignatureWeights};
use serde_json::json;

pub const CONTRACTS: [&str; 4] = ["swap_fixed_min", "swap_scaled_min", "capped_token_bypass", "capped_token_safe"];

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn contract_path(stem: &str) -> PathBuf {
    fixtures().join(format!("contracts/{stem}.sol"))
}

pub fn replay(stem: &str) -> ReplayBackend {
    ReplayBackend::from_path(&fixtures().join(format!("replay/{stem}.json")), true).expect("replay store")
}

pub fn kb() -> (KnowledgeBase, SignatureWeights) {
    let kb = load_kb(&fixtures().join("kb/kb.jsonl")).expect("kb");
    let weights = infer_signature_weights(&kb).expect("weights");
    (kb, weights)
}

pub fn analyze(stem: &str, backend: &dyn LlmBackend) -> ContractReport {
    let (kb, weights) = kb();
    let params = CheckerParams::default();
    let model = compile_to_model(&PrecompiledAst, &contract_path(stem)).expect("model");
    let analyzer = Analyzer {
        kb: &kb,
        weights: &weights,
        params: &params,
        backend,
    };
    analyze_model(&format!("{stem}.sol"), &model, &analyzer, &SnapshotRepository::new()).expect("analysis")
}

/// The confirmed finding of the fixed-minimum swap fixture, from a replay run.
pub fn swap_finding() -> Finding {
    let (kb, weights) = kb();
    let model = compile_to_model(&PrecompiledAst, &contract_path("swap_fixed_min")).expect("model");
    let graph = scrcheck_core::features::build_composite_graph(&model);
    let usages = scrcheck_core::features::detect_scr_usages(&model, &graph);
    let backend = replay("swap_fixed_min");
    let repo = SnapshotRepository::new();
    let inspector = Inspector {
        backend: &backend,
        kb: &kb,
        weights: &weights,
        snapshots: &repo,
    };
    let context = ContractContext {
        name: "swap_fixed_min.sol".into(),
        source: primary_source(&model),
    };
    let mut findings = inspect_contract(&inspector, &context, &usages).expect("inspect").into_findings();
    assert_eq!(findings.len(), 1);
    findings.remove(0)
}

/// `total` copies of `finding`, each with fresh feature-extraction and Stage3
/// snapshots in `repo`. The first `conflicts` copies report a drifted
/// signature at Stage3.
pub fn counting_corpus(finding: &Finding, repo: &SnapshotRepository, total: usize, conflicts: usize) -> Vec<Finding> {
    let u = &finding.usage;
    let key = scrcheck_core::inspector::usage_key(u);
    let sig = u.signature.render();
    let drifted = format!(
        "{}-{}-{}-{}",
        u.signature.contract_name,
        u.signature.function_name,
        u.signature.param_count + 1,
        u.signature.return_type
    );
    (0..total)
        .map(|i| {
            let fe = repo
                .capture(Phase::FeatureExtraction, &key, &feature_snapshot_payload(u))
                .expect("fe snapshot");
            let stage3 = json!({
                "signature": if i < conflicts { &drifted } else { &sig },
                "security": "critical",
                "definition": u.definition,
            });
            let s3 = repo
                .capture(Phase::Stage3, &key, stage3.as_object().expect("object"))
                .expect("stage3 snapshot");
            Finding {
                snapshots: vec![fe, s3],
                ..finding.clone()
            }
        })
        .collect()
}
