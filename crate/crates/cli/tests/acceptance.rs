//! Acceptance suite. Each criterion runs against an independent oracle within
//! its time budget and prints one `PASS`/`FAIL` line; the process exits
//! non-zero if any criterion fails.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::{json, Map, Value};

use scrcheck_core::detection::{
    conflict_check, control_similarity, finalize_verdicts, is_flagged, logical_similarity, numeric_similarity,
    sensitivity_sweep, CheckerParams, LabeledScores, SimilarityScores,
};
use scrcheck_core::features::compiler::compile_to_model;
use scrcheck_core::features::embedding::{BasicAttrs, PcgAttrs};
use scrcheck_core::features::model::{ContractKind, FunctionKind, Param, Span};
use scrcheck_core::features::{
    build_composite_graph, detect_scr_usages, extract_signature, CfgCounts, ConstraintKind, ContractDecl,
    FunctionDecl, LogicalConstraint, PrecompiledAst, ReturnClass,
};
use scrcheck_core::inspector::{
    feature_snapshot_payload, inspect_contract, usage_key, ContractContext, Finding, Inspector, Phase, SnapshotField,
    SnapshotRepository,
};
use scrcheck_core::kb::{load_kb, UsageKnowledge};
use scrcheck_core::llm::ReplayBackend;
use scrcheck_core::pipeline::primary_source;
use scrcheck_core::report::AnalysisReport;
use scrcheck_core::retrieval::{infer_signature_weights, item_similarity};
use scrcheck_core::{
    CompositeSignature, FinalVerdict, KnowledgeBase, LogicalSequence, ScrRecord, StructuralEmbedding, UsageGroup,
};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn random_ident(rng: &mut StdRng, max: usize) -> String {
    const FIRST: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz_$";
    const REST: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789_$-";
    let len = rng.gen_range(1..=max);
    let mut s = String::with_capacity(len);
    s.push(FIRST[rng.gen_range(0..FIRST.len())] as char);
    for _ in 1..len {
        s.push(REST[rng.gen_range(0..REST.len())] as char);
    }
    s
}

// ---------------------------------------------------------------- criterion 1

fn signature_rendering() -> Outcome {
    let param = |name: &str| Param { name: name.into(), ty: "address".into() };
    let function = FunctionDecl {
        ast_id: 1,
        name: "getReserves".into(),
        kind: FunctionKind::Function,
        params: vec![param("factory"), param("tokenA"), param("tokenB")],
        return_types: vec!["uint256".into()],
        modifiers: vec![],
        body_nodes: None,
        overrides: None,
        span: Span::default(),
    };
    let owner = ContractDecl {
        ast_id: 0,
        name: "UniswapV2Library".into(),
        kind: ContractKind::Library,
        is_interface: false,
        bases: vec![],
        base_specs: vec![],
        linearized: vec![],
        functions: vec![],
        span: Span::default(),
    };
    let rendered = extract_signature(&function, &owner).render();
    ensure(rendered == "UniswapV2Library-getReserves-3-uint256", || format!("rendered {rendered}"))?;
    let mut rng = StdRng::seed_from_u64(1);
    for _ in 0..1000 {
        let sig = CompositeSignature::new(
            &random_ident(&mut rng, 24),
            &random_ident(&mut rng, 24),
            rng.gen_range(0..32),
            &random_ident(&mut rng, 12),
        );
        let text = sig.render();
        let back = CompositeSignature::parse(&text).map_err(|e| format!("{text}: {e}"))?;
        ensure(back == sig && back.render() == text, || format!("round trip changed {text}"))?;
    }
    Ok("getReserves example exact; 1000 random round trips".into())
}

// ---------------------------------------------------------------- criterion 2

fn record(sig: CompositeSignature, id: usize) -> ScrRecord {
    ScrRecord {
        id: format!("r{id:04}"),
        signature: sig,
        sequence: LogicalSequence::default(),
        embedding: StructuralEmbedding::bodiless(0, "void"),
        knowledge: UsageKnowledge::default(),
        provenance: "synthetic".into(),
        diagnostics: vec![],
    }
}

/// Direct evaluation of the weighting equations: normalized lengths, sample
/// variance, stability constant from the lower median of the group's
/// variances, inverse-variance share within the group, half per group.
fn oracle_weights(items: &[[String; 4]]) -> [f64; 4] {
    let n = items.len();
    let mut var = [0.0; 4];
    for (i, v) in var.iter_mut().enumerate() {
        let lens: Vec<f64> = items.iter().map(|it| it[i].chars().count() as f64).collect();
        let total: f64 = lens.iter().sum();
        let norm: Vec<f64> = lens.iter().map(|l| if total == 0.0 { 1.0 / n as f64 } else { l / total }).collect();
        let mean = norm.iter().sum::<f64>() / n as f64;
        *v = norm.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n as f64 - 1.0);
    }
    let mut w = [0.0; 4];
    for group in [[0usize, 1], [2, 3]] {
        let mut vs: Vec<f64> = group.iter().map(|&i| var[i]).collect();
        vs.sort_by(f64::total_cmp);
        let eps = 0.01 * vs[(vs.len() - 1) / 2];
        let d: Vec<f64> = group.iter().map(|&i| var[i] + eps).collect();
        if d.contains(&0.0) {
            // Unbounded inverse variance: the zero-variance items split the group.
            let zeros = d.iter().filter(|x| **x == 0.0).count() as f64;
            for (k, &i) in group.iter().enumerate() {
                w[i] = if d[k] == 0.0 { 0.5 / zeros } else { 0.0 };
            }
        } else {
            let inv_sum: f64 = d.iter().map(|x| 1.0 / x).sum();
            for (k, &i) in group.iter().enumerate() {
                w[i] = 0.5 * (1.0 / d[k]) / inv_sum;
            }
        }
    }
    w
}

fn weight_inference() -> Outcome {
    // Symmetric corpus: every item has the same length spread.
    let symmetric: Vec<ScrRecord> = [("Ab", "cd", 10, "ef"), ("Abcd", "cdef", 1000, "efgh")]
        .iter()
        .enumerate()
        .map(|(i, (c, f, p, r))| record(CompositeSignature::new(c, f, *p, r), i))
        .collect();
    let w = infer_signature_weights(&KnowledgeBase::new(symmetric)).map_err(|e| e.to_string())?;
    ensure(w.w.iter().all(|x| (x - 0.25).abs() <= 1e-9), || format!("symmetric weights {:?}", w.w))?;

    let mut rng = StdRng::seed_from_u64(2);
    for corpus in 0..100 {
        let n = rng.gen_range(2..40);
        let records: Vec<ScrRecord> = (0..n)
            .map(|i| {
                let sig = CompositeSignature::new(
                    &random_ident(&mut rng, 30),
                    &random_ident(&mut rng, 20),
                    rng.gen_range(0..150),
                    ["void", "bool", "uint256", "address", "tuple", "bytes32"][rng.gen_range(0..6)],
                );
                record(sig, i)
            })
            .collect();
        let items: Vec<[String; 4]> = records.iter().map(|r| r.signature.items()).collect();
        let w = infer_signature_weights(&KnowledgeBase::new(records)).map_err(|e| e.to_string())?;
        let expected = oracle_weights(&items);
        ensure((w.w[0] + w.w[1] - 0.5).abs() <= 1e-9 && (w.w[2] + w.w[3] - 0.5).abs() <= 1e-9, || {
            format!("corpus {corpus}: group sums of {:?}", w.w)
        })?;
        for i in 0..4 {
            ensure((w.w[i] - expected[i]).abs() <= 1e-9, || {
                format!("corpus {corpus}: item {i} {} vs oracle {}", w.w[i], expected[i])
            })?;
        }
    }
    Ok("symmetric corpus 0.25 each; 100 random corpora match the oracle within 1e-9".into())
}

// ---------------------------------------------------------------- criterion 3

fn dp_levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=b.len() {
        d[0][j] = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = d[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    d[a.len()][b.len()]
}

fn oracle_item_similarity(a: &str, b: &str) -> f64 {
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        1.0
    } else {
        1.0 - dp_levenshtein(a, b) as f64 / longest as f64
    }
}

/// Minimum cost over every alignment of the two step lists, by exhaustive recursion.
fn brute_alignment(a: &[LogicalConstraint], b: &[LogicalConstraint]) -> f64 {
    match (a.split_first(), b.split_first()) {
        (None, None) => 0.0,
        (Some((_, ra)), None) => 1.0 + brute_alignment(ra, b),
        (None, Some((_, rb))) => 1.0 + brute_alignment(a, rb),
        (Some((x, ra)), Some((y, rb))) => {
            let sub = if x.kind == y.kind {
                1.0 - oracle_item_similarity(&x.condition, &y.condition)
            } else {
                1.0
            };
            let pair = sub + brute_alignment(ra, rb);
            let del = 1.0 + brute_alignment(ra, b);
            let ins = 1.0 + brute_alignment(a, rb);
            pair.min(del).min(ins)
        }
    }
}

fn oracle_logical(a: &[LogicalConstraint], b: &[LogicalConstraint]) -> f64 {
    match (a.is_empty(), b.is_empty()) {
        (true, true) => 1.0,
        (true, false) | (false, true) => 0.0,
        _ => 1.0 - brute_alignment(a, b) / a.len().max(b.len()) as f64,
    }
}

fn random_text(rng: &mut StdRng) -> String {
    const ALPHABET: &[char] = &['a', 'b', 'c', '0', '1', '>', '=', ' ', '_', 'é', 'ß', '中'];
    let len = rng.gen_range(0..12);
    (0..len).map(|_| ALPHABET[rng.gen_range(0..ALPHABET.len())]).collect()
}

fn random_embedding(rng: &mut StdRng) -> StructuralEmbedding {
    let zero = rng.gen_bool(0.2);
    let draws = [3u32, 20, 30, 6, 3, 4, 60, 6, 8, 8].map(|hi| if zero { 0 } else { rng.gen_range(0..hi) });
    let counts = [draws[0], draws[1], draws[2], draws[3], draws[4], draws[5]];
    let basic = BasicAttrs {
        node_count: draws[6],
        param_count: draws[7],
        return_class: ReturnClass::ALL[rng.gen_range(0..ReturnClass::ALL.len())],
    };
    let pcg = PcgAttrs {
        internal_call_count: draws[8],
        external_call_count: draws[9],
    };
    StructuralEmbedding {
        basic,
        pcg_attrs: pcg,
        cfg_attrs: CfgCounts {
            entry: counts[0],
            variable: counts[1],
            expression: counts[2],
            conditional: counts[3],
            loops: counts[4],
            returns: counts[5],
        },
    }
}

fn random_sequence(rng: &mut StdRng) -> Vec<LogicalConstraint> {
    const KINDS: [ConstraintKind; 4] =
        [ConstraintKind::Modifier, ConstraintKind::If, ConstraintKind::Require, ConstraintKind::Revert];
    const CONDS: [&str; 6] = ["amount>0", "amount>=0", "msg.sender==owner", "onlyOwner", "x<cap", ""];
    (0..rng.gen_range(0..=4))
        .map(|_| LogicalConstraint::new(KINDS[rng.gen_range(0..4)], CONDS[rng.gen_range(0..CONDS.len())]))
        .collect()
}

fn similarity_kernels() -> Outcome {
    let mut rng = StdRng::seed_from_u64(3);
    for _ in 0..10_000 {
        let (a, b) = (random_text(&mut rng), random_text(&mut rng));
        let got = item_similarity(&a, &b);
        let want = oracle_item_similarity(&a, &b);
        ensure(got == want, || format!("item_similarity({a:?}, {b:?}) = {got}, oracle {want}"))?;
    }
    let zero = StructuralEmbedding {
        basic: BasicAttrs {
            node_count: 0,
            param_count: 0,
            return_class: ReturnClass::Void,
        },
        pcg_attrs: PcgAttrs::default(),
        cfg_attrs: CfgCounts::default(),
    };
    ensure(control_similarity(&zero, &zero) == 1.0, || "two empty bodies".into())?;
    for _ in 0..10_000 {
        let (x, y) = (random_embedding(&mut rng), random_embedding(&mut rng));
        let (sn, sc) = (numeric_similarity(&x, &y), control_similarity(&x, &y));
        ensure((0.0..=1.0).contains(&sn) && (0.0..=1.0).contains(&sc), || format!("out of range {sn} {sc}"))?;
        ensure(numeric_similarity(&x, &x) == 1.0 && control_similarity(&x, &x) == 1.0, || {
            format!("self similarity of {x:?}")
        })?;
        let (cx, cy) = (x.control_vector(), y.control_vector());
        let zx = cx.iter().all(|v| *v == 0.0);
        let zy = cy.iter().all(|v| *v == 0.0);
        if zx && zy {
            ensure(sc == 1.0, || "both-zero control vectors".into())?;
        } else if zx != zy {
            ensure(sc == 0.0, || "one-zero control vector".into())?;
        }
    }
    let mut checked = 0;
    for _ in 0..5_000 {
        let (a, b) = (random_sequence(&mut rng), random_sequence(&mut rng));
        let got = logical_similarity(&LogicalSequence::new(a.clone()), &LogicalSequence::new(b.clone()));
        let want = oracle_logical(&a, &b);
        ensure((got - want).abs() <= 1e-12, || format!("logical {a:?} vs {b:?}: {got} vs {want}"))?;
        checked += 1;
    }
    Ok(format!("10000 string pairs exact; 10000 embedding pairs bounded; {checked} sequence pairs match"))
}

// ---------------------------------------------------------------- criterion 4

fn checker() -> Outcome {
    let p = CheckerParams::default();
    let scores = |s_n, s_c, s_l| SimilarityScores { s_n, s_c, s_l };
    let flags = (
        is_flagged(&scores(1.0, 1.0, None), UsageGroup::Comprehensive, &p),
        is_flagged(&scores(0.0, 1.0, None), UsageGroup::Comprehensive, &p),
        is_flagged(&scores(0.5, 0.5, Some(0.95)), UsageGroup::Targeted, &p),
    );
    ensure(flags == (false, true, false), || format!("examples flagged {flags:?}"))?;
    let mut rng = StdRng::seed_from_u64(4);
    for _ in 0..10_000 {
        let s = scores(rng.gen(), rng.gen(), rng.gen_bool(0.8).then(|| rng.gen()));
        let group = if rng.gen_bool(0.5) { UsageGroup::Targeted } else { UsageGroup::Comprehensive };
        let wn: f64 = rng.gen();
        let wt: f64 = rng.gen();
        let base = CheckerParams {
            w_o: [wn, 1.0 - wn],
            w_t: [wt, 1.0 - wt],
            tau_o: rng.gen(),
            tau_t: rng.gen(),
            tau_l: rng.gen(),
        };
        let before = is_flagged(&s, group, &base);
        for k in 0..3 {
            let mut raised = base;
            let bump: f64 = rng.gen_range(0.0..0.5);
            match k {
                0 => raised.tau_o += bump,
                1 => raised.tau_t += bump,
                _ => raised.tau_l += bump,
            }
            ensure(!before || is_flagged(&s, group, &raised), || {
                format!("raising a threshold unflagged {s:?} in {group} ({base:?} -> {raised:?})")
            })?;
        }
    }
    Ok("examples give (false, true, false); monotone over 10000 random tuples".into())
}

// ---------------------------------------------------------------- criterion 5

fn payload(v: Value) -> Map<String, Value> {
    match v {
        Value::Object(m) => m,
        _ => unreachable!("payloads are objects"),
    }
}

fn fixture_kb() -> Result<KnowledgeBase, String> {
    load_kb(&fixtures().join("kb/kb.jsonl")).map_err(|e| e.to_string())
}

/// The confirmed finding of the fixed-minimum swap fixture, from a replay run.
fn swap_finding(kb: &KnowledgeBase) -> Result<Finding, String> {
    let weights = infer_signature_weights(kb).map_err(|e| e.to_string())?;
    let model =
        compile_to_model(&PrecompiledAst, &fixtures().join("contracts/swap_fixed_min.sol")).map_err(|e| e.to_string())?;
    let usages = detect_scr_usages(&model, &build_composite_graph(&model));
    let backend =
        ReplayBackend::from_path(&fixtures().join("replay/swap_fixed_min.json"), true).map_err(|e| e.to_string())?;
    let repo = SnapshotRepository::new();
    let inspector = Inspector {
        backend: &backend,
        kb,
        weights: &weights,
        snapshots: &repo,
    };
    let context = ContractContext {
        name: "swap_fixed_min.sol".into(),
        source: primary_source(&model),
    };
    let mut findings = inspect_contract(&inspector, &context, &usages)
        .map_err(|e| e.to_string())?
        .into_findings();
    ensure(findings.len() == 1, || format!("{} findings in the swap fixture", findings.len()))?;
    Ok(findings.remove(0))
}

fn conflict_checker() -> Outcome {
    let repo = SnapshotRepository::new();
    let s1 = repo
        .capture(Phase::Stage1, "u", &payload(json!({"signature": "A-f-2-uint256"})))
        .map_err(|e| e.to_string())?;
    let s3 = repo
        .capture(Phase::Stage3, "u", &payload(json!({"signature": "A-f-3-uint256"})))
        .map_err(|e| e.to_string())?;
    let drift = conflict_check(&[s1, s3], &repo, &[]).map_err(|e| e.to_string())?;
    ensure(!drift.is_consistent(), || "signature drift was consistent".into())?;

    let fe = repo
        .capture(
            Phase::FeatureExtraction,
            "v",
            &payload(json!({"signature": "B-g-0-uint256", "parameters": 0})),
        )
        .map_err(|e| e.to_string())?;
    let threats = vec!["insecure parameter passing".to_string()];
    let r2 = conflict_check(&[fe], &repo, &threats).map_err(|e| e.to_string())?;
    ensure(!r2.is_consistent(), || "zero parameters with a parameter-passing threat was consistent".into())?;

    let kb = fixture_kb()?;
    let weights = infer_signature_weights(&kb).map_err(|e| e.to_string())?;
    let finding = swap_finding(&kb)?;
    let u = &finding.usage;
    let key = usage_key(u);
    let drifted = format!(
        "{}-{}-{}-{}",
        u.signature.contract_name,
        u.signature.function_name,
        u.signature.param_count + 1,
        u.signature.return_type
    );
    let repo = SnapshotRepository::new();
    let mut corpus = Vec::with_capacity(2684);
    for i in 0..2684 {
        let fe = repo
            .capture(Phase::FeatureExtraction, &key, &feature_snapshot_payload(u))
            .map_err(|e| e.to_string())?;
        let sig = if i < 1957 { drifted.clone() } else { u.signature.render() };
        let s3 = repo
            .capture(
                Phase::Stage3,
                &key,
                &payload(json!({"signature": sig, "security": "critical", "definition": u.definition})),
            )
            .map_err(|e| e.to_string())?;
        corpus.push(Finding {
            snapshots: vec![fe, s3],
            ..finding.clone()
        });
    }
    let verdicts =
        finalize_verdicts(corpus, &kb, &weights, &CheckerParams::default(), &repo).map_err(|e| e.to_string())?;
    let survivors = verdicts.iter().filter(|v| v.final_verdict == FinalVerdict::Violation).count();
    ensure(survivors == 727, || format!("{survivors} survivors"))?;
    ensure(
        verdicts
            .iter()
            .all(|v| v.final_verdict != FinalVerdict::Violation || (v.flagged && v.conflict.is_consistent())),
        || "a violation is unflagged or conflicting".into(),
    )?;
    Ok("drift and zero-parameter examples conflict; 2684 candidates, 1957 conflicts, 727 survive".into())
}

// ---------------------------------------------------------------- criterion 6

fn run_analyze(stem: &str, out: &Path) -> Result<(i32, Duration), String> {
    let f = fixtures();
    let start = Instant::now();
    let o = Command::new(env!("CARGO_BIN_EXE_scrcheck"))
        .arg("analyze")
        .arg("--contract")
        .arg(f.join(format!("contracts/{stem}.sol")))
        .arg("--kb")
        .arg(f.join("kb/kb.jsonl"))
        .arg("--replay")
        .arg(f.join(format!("replay/{stem}.json")))
        .arg("--out")
        .arg(out)
        .output()
        .map_err(|e| e.to_string())?;
    let code = o.status.code().ok_or("analyze was killed")?;
    Ok((code, start.elapsed()))
}

fn end_to_end() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut slowest = Duration::ZERO;
    for (stem, violations) in [
        ("swap_fixed_min", 1),
        ("capped_token_bypass", 1),
        ("swap_scaled_min", 0),
        ("capped_token_safe", 0),
    ] {
        let mut bytes = Vec::new();
        for run in 0..2 {
            let out = dir.path().join(format!("{stem}-{run}.json"));
            let (code, took) = run_analyze(stem, &out)?;
            slowest = slowest.max(took);
            ensure(took < Duration::from_secs(10), || format!("{stem} took {took:?}"))?;
            ensure(code == if violations > 0 { 3 } else { 0 }, || format!("{stem} exited {code}"))?;
            let text = std::fs::read_to_string(&out).map_err(|e| e.to_string())?;
            let report = AnalysisReport::from_json(&text)?;
            let found: Vec<_> = report.violations().collect();
            ensure(found.len() == violations, || format!("{stem}: {} violations", found.len()))?;
            if let Some(v) = found.first() {
                let on_path = match stem {
                    "swap_fixed_min" => v.signature.contains("-swap-") && v.text.contains("swap("),
                    _ => {
                        let threats = v.threat_vectors.join(" ");
                        threats.contains("_mint") && threats.contains("cap")
                    }
                };
                ensure(on_path, || format!("{stem}: violation at {} ({})", v.text, v.signature))?;
            }
            bytes.push(text);
        }
        ensure(bytes[0] == bytes[1], || format!("{stem}: reports differ between runs"))?;
    }
    Ok(format!("violations 1/1/0/0 at the expected sites; reruns byte-identical; slowest {slowest:.2?}"))
}

// ---------------------------------------------------------------- criterion 7

fn read_scores(rel: &str) -> Result<Vec<LabeledScores>, String> {
    let text = std::fs::read_to_string(fixtures().join(rel)).map_err(|e| e.to_string())?;
    serde_json::from_str(&text).map_err(|e| e.to_string())
}

fn sweep() -> Outcome {
    let params = CheckerParams::default();
    let labeled = sensitivity_sweep(&params, &read_scores("sweep/labeled/scores.json")?).map_err(|e| e.to_string())?;
    ensure(labeled.families.len() == 5, || format!("{} families", labeled.families.len()))?;
    for f in &labeled.families {
        ensure(f.settings.len() == 11, || format!("{} has {} settings", f.family.label(), f.settings.len()))?;
    }
    let step = sensitivity_sweep(&params, &read_scores("sweep/step/step.json")?).map_err(|e| e.to_string())?;
    for f in step.families.iter().filter(|f| f.family.label().starts_with("tau")) {
        let sizes: Vec<usize> = f.settings.iter().map(|s| s.metrics.flagged).collect();
        ensure(sizes.windows(2).all(|w| w[0] <= w[1]), || format!("{}: {sizes:?}", f.family.label()))?;
    }
    let tau_o = step.families.iter().find(|f| f.family.label() == "tau_o").ok_or("no tau_o family")?;
    for s in &tau_o.settings {
        let expected = if s.value > 0.95 { 20 } else { 0 };
        ensure(s.metrics.flagged == expected, || format!("tau_o {}: {} flagged", s.value, s.metrics.flagged))?;
    }
    Ok("5 families x 11 settings; flagged counts monotone in every threshold".into())
}

// ---------------------------------------------------------------- criterion 8

fn snapshot_admissibility() -> Outcome {
    const NAMES: [&str; 10] = [
        "signature",
        "security",
        "definition",
        "parameters",
        "return_type",
        "parent_contract",
        "overridden_function",
        "related_calls",
        "verdict",
        "owner",
    ];
    let repo = SnapshotRepository::new();
    let mut rng = StdRng::seed_from_u64(8);
    let (mut stored, mut rejected) = (0, 0);
    for _ in 0..10_000 {
        let phase = Phase::ALL[rng.gen_range(0..Phase::ALL.len())];
        let mut fields = Map::new();
        for _ in 0..rng.gen_range(1..=3) {
            let name = NAMES[rng.gen_range(0..NAMES.len())];
            let value = if name == "related_calls" { json!(["A.f"]) } else { json!("x") };
            fields.insert(name.to_string(), value);
        }
        let admissible = fields.keys().all(|k| {
            k.parse::<SnapshotField>()
                .map(|f| phase.allows(f))
                .unwrap_or(false)
        });
        let before = repo.len();
        match repo.capture(phase, "u", &fields) {
            Ok(_) => {
                ensure(admissible, || format!("stored {fields:?} at {phase:?}"))?;
                stored += 1;
            }
            Err(_) => {
                ensure(!admissible, || format!("rejected admissible {fields:?} at {phase:?}"))?;
                ensure(repo.len() == before, || "a rejected capture left a snapshot".into())?;
                rejected += 1;
            }
        }
    }
    for s in repo.snapshots() {
        let names: BTreeSet<SnapshotField> = s.fields.keys().copied().collect();
        ensure(names.iter().all(|f| s.phase.allows(*f)), || format!("snapshot {} holds {names:?}", s.id))?;
    }
    Ok(format!("10000 attempts: {stored} stored, {rejected} rejected, none inadmissible"))
}

fn main() {
    type Criterion = (&'static str, Duration, fn() -> Outcome);
    let criteria: [Criterion; 8] = [
        ("1 signature rendering", Duration::from_secs(1), signature_rendering),
        ("2 weight inference", Duration::from_secs(5), weight_inference),
        ("3 similarity kernels", Duration::from_secs(30), similarity_kernels),
        ("4 checker", Duration::from_secs(5), checker),
        ("5 conflict checker", Duration::from_secs(5), conflict_checker),
        ("6 end-to-end replay", Duration::from_secs(40), end_to_end),
        ("7 sensitivity sweep", Duration::from_secs(10), sweep),
        ("8 snapshot admissibility", Duration::from_secs(5), snapshot_admissibility),
    ];
    let mut failed = 0;
    for (name, budget, check) in criteria {
        let start = Instant::now();
        let outcome = check();
        let took = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if took <= budget => Ok(detail),
            Ok(detail) => Err(format!("{detail}; over budget {budget:?}")),
            Err(e) => Err(e),
        };
        match outcome {
            Ok(detail) => println!("PASS criterion {name} ({took:.2?}): {detail}"),
            Err(e) => {
                failed += 1;
                println!("FAIL criterion {name} ({took:.2?}): {e}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
