//! Regenerates the offline fixtures: the knowledge base under `fixtures/kb/`
//! and the replay stores under `fixtures/replay/`.
//!
//! Answers come from a rule-based reviewer standing in for a language model.
//! It reads only the prompt text, applies a few fixed review rules, and
//! answers in the requested JSON shape:
//!
//! * parameter constraints come from `require` conditions naming a parameter,
//!   and minimum-amount parameters must be derived from the input amount;
//! * a call passing the literal `0` is risky, and is confirmed when the
//!   reference knowledge constrains the zeroed parameter;
//! * a child contract that calls an ancestor's function by qualified name,
//!   skipping the inherited base's override of it, removes the base's check.
//!
//! Run with `cargo run -p scrcheck-core --example record_fixtures` from the
//! workspace root.

use std::path::PathBuf;

use regex::Regex;
use serde_json::{json, Value};

use scrcheck_core::detection::CheckerParams;
use scrcheck_core::features::compiler::compile_to_model;
use scrcheck_core::features::PrecompiledAst;
use scrcheck_core::inspector::SnapshotRepository;
use scrcheck_core::kb::{build_records, ingest_sources, store_kb, KnowledgeBase};
use scrcheck_core::llm::{CompletionRequest, FnBackend, LlmError, RecordingBackend};
use scrcheck_core::pipeline::{analyze_model, Analyzer};
use scrcheck_core::retrieval::{infer_signature_weights, write_cached_weights};

fn line_after<'t>(text: &'t str, prefix: &str) -> &'t str {
    text.lines()
        .find_map(|l| l.strip_prefix(prefix))
        .map(str::trim)
        .unwrap_or("")
}

fn section<'t>(text: &'t str, header: &str, end: &str) -> &'t str {
    let start = text.find(header).map(|i| i + header.len()).unwrap_or(text.len());
    let rest = &text[start..];
    let stop = rest.find(end).unwrap_or(rest.len());
    rest[..stop].trim()
}

/// Items of a rendered signature: contract, function, count, return type.
fn signature_items(sig: &str) -> [String; 4] {
    let mut it = sig.split('-').map(str::to_string);
    [(); 4].map(|_| it.next().unwrap_or_default())
}

fn list(text: &str) -> Vec<String> {
    if text == "(none)" || text.is_empty() {
        vec![]
    } else {
        text.split(", ").map(str::to_string).collect()
    }
}

/// Positions of arguments that are the literal `0` in a call text.
fn zero_arguments(call: &str) -> Vec<usize> {
    let Some(open) = call.find('(') else { return vec![] };
    let inner = call[open + 1..].trim_end_matches(')');
    inner
        .split(',')
        .enumerate()
        .filter(|(_, a)| a.trim() == "0")
        .map(|(i, _)| i)
        .collect()
}

fn param_constraints(req: &str) -> Value {
    let params: Vec<(usize, String)> = section(req, "Parameters:\n", "\n\nSource:")
        .lines()
        .filter_map(|l| {
            let (i, rest) = l.split_once(": ")?;
            Some((i.parse().ok()?, rest.split_whitespace().last()?.to_string()))
        })
        .collect();
    let source = section(req, "Source:\n", "\n\nTool results:");
    let require = Regex::new(r"require\((.*?),\s*\x22").unwrap();
    let literal_bound = Regex::new(r"[<>]=?\s*\d|!=\s*address\(0\)").unwrap();
    let mut out = Vec::new();
    for (i, name) in &params {
        let word = Regex::new(&format!(r"\b{}\b", regex::escape(name))).unwrap();
        for c in require.captures_iter(source) {
            let cond = c[1].trim();
            if word.is_match(cond) {
                let class = if literal_bound.is_match(cond) {
                    "Range"
                } else {
                    "Relation"
                };
                out.push(json!({"index": i, "constraint": format!("must satisfy `{cond}`"), "class": class}));
            }
        }
        if name.to_lowercase().contains("min") {
            out.push(json!({"index": i, "constraint": format!("`{name}` must be derived from the input amount with a bounded slippage tolerance; a constant such as zero disables the protection"), "class": "Relation"}));
        }
    }
    json!({"param_constraints": out, "rationale": "constraints read from the guards of the function"})
}

fn return_checks(req: &str) -> Value {
    let returns = line_after(req, "Returns:");
    let checks: Vec<Value> = if returns == "bool" {
        vec![json!({"index": 0, "check": "the returned success flag must be checked"})]
    } else {
        vec![]
    };
    json!({"return_checks": checks})
}

fn override_obligations(req: &str) -> Value {
    let source = section(req, "Source:\n", "\n\nTool results:");
    let header = source.lines().next().unwrap_or("");
    let require = Regex::new(r"require\((.*?),\s*\x22").unwrap();
    let mut out = Vec::new();
    if header.contains("virtual") {
        for c in require.captures_iter(source) {
            out.push(format!("overrides and inheritors must keep the check `{}` on every path", c[1].trim()));
        }
    }
    json!({"override_obligations": out})
}

fn t1(req: &str) -> Value {
    let line = Regex::new(r"^(\d+)\. (.*) \(line .*\) signature (\S+) definition (.*)$").unwrap();
    let mut flagged = Vec::new();
    for l in section(req, "Extracted SCR calls:\n", "\n\nAnswer shape:").lines() {
        let Some(c) = line.captures(l) else { continue };
        if zero_arguments(&c[2]).is_empty() {
            continue;
        }
        let items = signature_items(&c[3]);
        flagged.push(json!({
            "index": c[1].parse::<u64>().unwrap(),
            "signature": &c[3],
            "security": "critical",
            "definition": &c[4],
            "parameters": items[2].parse::<u64>().unwrap_or(0),
            "return_type": items[3],
            "parent_contract": items[0],
            "overridden_function": "none",
        }));
    }
    let verdict = if flagged.is_empty() { "No" } else { "Yes" };
    json!({"verdict": verdict, "usages": flagged})
}

fn t2(req: &str) -> Value {
    let call = line_after(req, "Call:");
    let zeros = zero_arguments(call);
    let threats: Vec<String> = zeros
        .iter()
        .map(|i| format!("argument {i} is the constant 0, so the minimum-output protection is off and the call accepts any price, open to sandwich attacks"))
        .collect();
    json!({
        "verdict": if threats.is_empty() { "No" } else { "Yes" },
        "threats": threats,
        "signature": line_after(req, "Signature:"),
        "security": "critical",
        "related_calls": list(line_after(req, "Related calls:")),
    })
}

fn t3(req: &str) -> Value {
    let zeros = zero_arguments(line_after(req, "Call:"));
    let knowledge = section(req, "Reference usage knowledge:\n", "\n\nAnswer shape:");
    let constrained = zeros.iter().any(|i| {
        knowledge.contains(&format!("param[{i}] Relation")) || knowledge.contains(&format!("param[{i}] NonTrivial"))
    });
    json!({
        "verdict": if constrained { "Yes" } else { "No" },
        "signature": line_after(req, "Signature:"),
        "security": "critical",
        "definition": line_after(req, "Definition:"),
    })
}

/// Parsed `Usage: Kind of Definition in Contract.function (line n)` line.
struct UsageLine {
    kind: String,
    definition: String,
    child: String,
    function: String,
}

fn usage_line(req: &str) -> UsageLine {
    let re = Regex::new(r"^Usage: (\w+) of (.*) in (\w+)\.(\w+) \(line").unwrap();
    let l = req.lines().find(|l| l.starts_with("Usage:")).unwrap_or("");
    let c = re.captures(l).expect("usage line");
    UsageLine {
        kind: c[1].to_string(),
        definition: c[2].to_string(),
        child: c[3].to_string(),
        function: c[4].to_string(),
    }
}

/// Body of `contract name` in a source text, by brace matching.
fn contract_body<'t>(source: &'t str, name: &str) -> &'t str {
    let re = Regex::new(&format!(r"\bcontract {}\b[^{{]*\{{", regex::escape(name))).unwrap();
    let Some(m) = re.find(source) else { return "" };
    let mut depth = 1;
    for (i, ch) in source[m.end()..].char_indices() {
        match ch {
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    return &source[m.end()..m.end() + i];
                }
            }
            _ => {}
        }
    }
    &source[m.end()..]
}

/// Qualified calls in the child that skip an override defined by the base.
fn bypasses(source: &str, base: &str, child: &str) -> Vec<String> {
    let body = contract_body(source, child);
    let base_body = contract_body(source, base);
    let call = Regex::new(r"\b(\w+)\.(\w+)\(").unwrap();
    let require = Regex::new(r"require\((.*?),\s*\x22").unwrap();
    let mut out = Vec::new();
    for c in call.captures_iter(body) {
        let (q, f) = (&c[1], &c[2]);
        if q == base || q == child || q == "super" || q == "msg" {
            continue;
        }
        let decl = Regex::new(&format!(r"function {}\([^)]*\)[^{{]*\boverride\b[^{{]*\{{", regex::escape(f))).unwrap();
        if let Some(m) = decl.find(base_body) {
            let check = require
                .captures(&base_body[m.end()..])
                .map(|r| r[1].trim().to_string())
                .unwrap_or_default();
            out.push(format!(
                "{child} calls {q}.{f} directly, skipping the {base}.{f} override and its check `{check}`; the enforcement it provides is bypassed"
            ));
        }
    }
    out
}

fn comprehensive(stage: &str, req: &str) -> Value {
    let u = usage_line(req);
    let signature = line_after(req, "Signature:").to_string();
    let items = signature_items(&signature);
    let base = items[0].clone();
    match stage {
        "C1" => json!({
            "verdict": "No",
            "signature": signature,
            "security": "critical",
            "definition": u.definition,
            "parameters": items[2].parse::<u64>().unwrap_or(0),
            "return_type": items[3],
            "parent_contract": base,
            "overridden_function": if u.kind == "Override" { u.function.as_str() } else { "none" },
        }),
        "C2" => {
            let source = section(req, "Contract source:\n", "\n\nUsage:");
            let threats = if u.kind == "Inherit" { bypasses(source, &base, &u.child) } else { vec![] };
            json!({
                "verdict": if threats.is_empty() { "No" } else { "Yes" },
                "threats": threats,
                "signature": signature,
                "security": "critical",
                "related_calls": list(line_after(req, "Related calls:")),
            })
        }
        _ => json!({
            "verdict": "No",
            "signature": signature,
            "security": "critical",
            "definition": u.definition,
        }),
    }
}

fn review(req: &CompletionRequest) -> Result<String, LlmError> {
    let tag = req.stage_tag.trim_end_matches("/retry");
    let text = &req.user_text;
    let answer = match tag {
        "uke/param-constraints" => param_constraints(text),
        "uke/return-checks" => return_checks(text),
        "uke/override-obligations" => override_obligations(text),
        "luv/T1" => t1(text),
        "luv/T2" => t2(text),
        "luv/T3" => t3(text),
        "luv/C1" => comprehensive("C1", text),
        "luv/C2" => comprehensive("C2", text),
        "luv/C3" => comprehensive("C3", text),
        other => return Err(LlmError::InvalidRequest(format!("no rule for stage `{other}`"))),
    };
    Ok(answer.to_string())
}

fn main() {
    let root = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "fixtures".into()));
    let units = ingest_sources(&root.join("scr_sources"), &PrecompiledAst).expect("ingest").units;
    let recorder = RecordingBackend::new(FnBackend(review));
    let built = build_records(&units, &recorder, Some(&PrecompiledAst)).expect("build");
    let kb_path = root.join("kb/kb.jsonl");
    store_kb(&built.records, &kb_path).expect("store kb");
    recorder.into_store().save(&root.join("replay/kb.json")).expect("save kb fixtures");
    println!("kb: {} records", built.records.len());

    let kb_bytes = std::fs::read(&kb_path).expect("read kb");
    let kb = KnowledgeBase::new(built.records);
    let weights = infer_signature_weights(&kb).expect("weights");
    write_cached_weights(&kb_path, &kb_bytes, &weights).expect("write weights");
    println!("weights: {:?}", weights.w);

    let mut contracts: Vec<PathBuf> = std::fs::read_dir(root.join("contracts"))
        .expect("contracts dir")
        .map(|e| e.expect("entry").path())
        .filter(|p| p.extension().is_some_and(|e| e == "sol"))
        .collect();
    contracts.sort();
    let params = CheckerParams::default();
    for path in contracts {
        let model = compile_to_model(&PrecompiledAst, &path).expect("model");
        let recorder = RecordingBackend::new(FnBackend(review));
        let analyzer = Analyzer {
            kb: &kb,
            weights: &weights,
            params: &params,
            backend: &recorder,
        };
        let label = path.file_name().unwrap().to_string_lossy().into_owned();
        let report = analyze_model(&label, &model, &analyzer, &SnapshotRepository::new()).expect("analyze");
        let stem = path.file_stem().unwrap().to_string_lossy().into_owned();
        recorder.into_store().save(&root.join(format!("replay/{stem}.json"))).expect("save fixtures");
        println!("{label}: {:?}", report.summary);
        if std::env::var_os("RECORD_VERBOSE").is_some() {
            println!("{}", scrcheck_core::report::render_text(&scrcheck_core::report::AnalysisReport::new(vec![report.clone()])));
        }
    }
}
