use std::path::{Path, PathBuf};

use scrcheck_core::features::{ConstraintKind, PrecompiledAst};
use scrcheck_core::kb::store::{from_jsonl, to_jsonl};
use scrcheck_core::kb::*;
use scrcheck_core::llm::{CompletionRequest, FnBackend, LlmError};

fn fixtures(dir: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(dir)
}

/// Answers every comprehension prompt with a well-formed empty result, except
/// for the swap parameter prompt which names a slippage relation.
fn scripted(req: &CompletionRequest) -> Result<String, LlmError> {
    let tag = req.stage_tag.trim_end_matches("/retry");
    Ok(match tag {
        "uke/param-constraints" if req.user_text.contains("Signature: SwapRouter-swap-4-uint256") => {
            r#"{"param_constraints":[{"index":1,"constraint":"derive from amountIn with bounded slippage","class":"Relation"}],"rationale":"minimum output protects against price movement"}"#.into()
        }
        "uke/param-constraints" => r#"{"param_constraints":[]}"#.into(),
        "uke/return-checks" => r#"{"return_checks":[]}"#.into(),
        _ => r#"{"override_obligations":[]}"#.into(),
    })
}

#[test]
fn ingest_compiles_every_source() {
    let report = ingest_sources(&fixtures("scr_sources"), &PrecompiledAst).unwrap();
    let ids: Vec<&str> = report.units.iter().map(|u| u.id.as_str()).collect();
    assert_eq!(ids, ["ERC20Capped.sol", "Ownable.sol", "SwapRouter.sol"]);
    assert!(report.skipped.is_empty());
    assert!(report.units.iter().all(|u| u.origin == Origin::Local));
}

#[test]
fn ingest_skips_uncompilable_sources() {
    let report = ingest_sources(&fixtures("scr_sources_broken"), &PrecompiledAst).unwrap();
    assert_eq!(report.units.len(), 2);
    assert_eq!(report.skipped.len(), 1);
    assert_eq!(report.skipped[0].0, "Broken.sol");
}

#[test]
fn empty_directory_has_no_sources() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(ingest_sources(dir.path(), &PrecompiledAst), Err(IngestError::NoSources(_))));
}

#[test]
fn build_records_for_every_function() {
    let units = ingest_sources(&fixtures("scr_sources"), &PrecompiledAst).unwrap().units;
    let report = build_records(&units, &FnBackend(scripted), Some(&PrecompiledAst)).unwrap();
    assert!(report.diagnostics.is_empty(), "{:?}", report.diagnostics);
    let sigs: Vec<String> = report.records.iter().map(|r| r.signature.render()).collect();
    for expected in [
        "ERC20Capped-constructor-1-void",
        "ERC20Capped-_mint-2-void",
        "ERC20-transfer-2-bool",
        "IOwnable-owner-0-address",
        "Ownable-transferOwnership-1-void",
        "SwapRouter-swap-4-uint256",
        "SwapRouter-getAmountOut-3-uint256",
    ] {
        assert!(sigs.iter().any(|s| s == expected), "missing {expected} in {sigs:?}");
    }
    let swap = report.records.iter().find(|r| r.signature.function_name == "swap").unwrap();
    assert_eq!(swap.id, "SwapRouter.sol::SwapRouter.swap/4");
    let kinds: Vec<ConstraintKind> = swap.sequence.steps.iter().map(|s| s.kind).collect();
    assert_eq!(kinds, vec![ConstraintKind::Require; 3]);
    assert_eq!(swap.knowledge.param_constraints.len(), 1);
    assert_eq!(swap.knowledge.param_constraints[0].class, ConstraintClass::Relation);

    let transfer = report.records.iter().find(|r| r.signature.function_name == "transferOwnership").unwrap();
    assert_eq!(transfer.sequence.steps[0].kind, ConstraintKind::Modifier);

    let iface = report.records.iter().find(|r| r.signature.contract_name == "IOwnable").unwrap();
    assert!(iface.knowledge.is_empty());

    // Interfaces stop the plan after the interface check.
    let ownable = &report.transcripts["Ownable.sol"];
    assert!(ownable.iter().any(|t| t.task.args.get("contract").map(String::as_str) == Some("IOwnable")));

    let again = build_records(&units, &FnBackend(scripted), Some(&PrecompiledAst)).unwrap();
    assert_eq!(again.records, report.records);
}

#[test]
fn duplicate_signatures_keep_the_first_unit() {
    let mut units = ingest_sources(&fixtures("scr_sources"), &PrecompiledAst).unwrap().units;
    let mut copy = units[2].clone();
    copy.id = "zz/SwapRouter.sol".into();
    units.push(copy);
    let report = build_records(&units, &FnBackend(scripted), None).unwrap();
    let swaps: Vec<&ScrRecord> = report.records.iter().filter(|r| r.signature.function_name == "swap").collect();
    assert_eq!(swaps.len(), 1);
    assert_eq!(swaps[0].provenance, "SwapRouter.sol");
}

#[test]
fn backend_failure_aborts_the_build() {
    let units = ingest_sources(&fixtures("scr_sources"), &PrecompiledAst).unwrap().units;
    let down = FnBackend(|_: &CompletionRequest| Err(LlmError::BackendUnavailable("offline".into())));
    assert!(matches!(build_records(&units, &down, None), Err(BuildError::Backend { .. })));
}

#[test]
fn store_round_trip() {
    let units = ingest_sources(&fixtures("scr_sources"), &PrecompiledAst).unwrap().units;
    let report = build_records(&units, &FnBackend(scripted), None).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("kb.jsonl");
    store_kb(&report.records, &path).unwrap();
    let kb = load_kb(&path).unwrap();
    assert_eq!(kb.records, report.records);
    assert_eq!(to_jsonl(&kb.records), std::fs::read_to_string(&path).unwrap());
}

#[test]
fn empty_kb_file_loads_empty() {
    assert!(from_jsonl("").unwrap().is_empty());
}

#[test]
fn corrupted_line_is_reported_with_its_number() {
    let units = ingest_sources(&fixtures("scr_sources"), &PrecompiledAst).unwrap().units;
    let report = build_records(&units, &FnBackend(scripted), None).unwrap();
    let mut text = to_jsonl(&report.records[..2]);
    text.push_str("{\"id\": 3}\n");
    match from_jsonl(&text) {
        Err(KbError::SchemaMismatch { line, .. }) => assert_eq!(line, 3),
        other => panic!("expected a schema mismatch, got {other:?}"),
    }
    let stale = to_jsonl(&report.records[..1]).replace("\"schema_version\":1", "\"schema_version\":0");
    assert!(matches!(from_jsonl(&stale), Err(KbError::SchemaMismatch { line: 1, .. })));
}
