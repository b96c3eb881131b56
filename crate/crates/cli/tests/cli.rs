//! Runs the `scrcheck` binary against the repository fixtures and checks exit
//! codes and written files.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use scrcheck_core::detection::SweepReport;
use scrcheck_core::report::AnalysisReport;

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scrcheck"))
        .args(args)
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn analyze(stem: &str, out: &Path) -> Output {
    let f = fixtures();
    run(&[
        "analyze",
        "--contract",
        s(&f.join(format!("contracts/{stem}.sol"))),
        "--kb",
        s(&f.join("kb/kb.jsonl")),
        "--replay",
        s(&f.join(format!("replay/{stem}.json"))),
        "--out",
        s(out),
    ])
}

#[test]
fn build_kb_is_deterministic_under_replay() {
    let dir = tempfile::tempdir().unwrap();
    let f = fixtures();
    let mut outputs = Vec::new();
    for name in ["a.jsonl", "b.jsonl"] {
        let out = dir.path().join(name);
        let o = run(&[
            "build-kb",
            "--sources",
            s(&f.join("scr_sources")),
            "--out",
            s(&out),
            "--replay",
            s(&f.join("replay/kb.json")),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], std::fs::read(f.join("kb/kb.jsonl")).unwrap());
    let records = String::from_utf8(outputs[0].clone()).unwrap().lines().count();
    assert!(records >= 3, "{records}");
    assert!(dir.path().join("a.jsonl.weights.json").is_file());
}

#[test]
fn build_kb_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty");
    std::fs::create_dir(&empty).unwrap();
    let store = dir.path().join("store.json");
    std::fs::write(&store, "{}\n").unwrap();
    let out = dir.path().join("kb.jsonl");
    let o = run(&["build-kb", "--sources", s(&empty), "--out", s(&out), "--replay", s(&store)]);
    assert_eq!(code(&o), 2);
    // An empty replay store misses every request, which is a backend failure.
    let sources = fixtures().join("scr_sources");
    let o = run(&["build-kb", "--sources", s(&sources), "--out", s(&out), "--replay", s(&store)]);
    assert_eq!(code(&o), 1);
    assert!(!out.exists());
}

#[test]
fn analyze_exit_codes_follow_violations() {
    let dir = tempfile::tempdir().unwrap();
    for (stem, expected) in [
        ("swap_fixed_min", 3),
        ("swap_scaled_min", 0),
        ("capped_token_bypass", 3),
        ("capped_token_safe", 0),
    ] {
        let out = dir.path().join(format!("{stem}.json"));
        let o = analyze(stem, &out);
        assert_eq!(code(&o), expected, "{stem}: {}", String::from_utf8_lossy(&o.stderr));
        let report = AnalysisReport::from_json(&std::fs::read_to_string(&out).unwrap()).unwrap();
        assert_eq!(report.summary.violations, usize::from(expected == 3));
        assert!(report.summary.is_conserved());
        let snapshots = std::fs::read_to_string(dir.path().join(format!("{stem}.json.snapshots.jsonl"))).unwrap();
        assert!(snapshots.lines().count() >= report.summary.candidates);
    }
}

#[test]
fn analyze_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    assert_eq!(code(&analyze("capped_token_bypass", &a)), 3);
    assert_eq!(code(&analyze("capped_token_bypass", &b)), 3);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(
        std::fs::read(dir.path().join("a.json.snapshots.jsonl")).unwrap(),
        std::fs::read(dir.path().join("b.json.snapshots.jsonl")).unwrap()
    );
}

#[test]
fn analyze_missing_kb_and_backend_failure() {
    let dir = tempfile::tempdir().unwrap();
    let f = fixtures();
    let contract = f.join("contracts/swap_fixed_min.sol");
    let missing = dir.path().join("none.jsonl");
    let replay = f.join("replay/swap_fixed_min.json");
    let o = run(&["analyze", "--contract", s(&contract), "--kb", s(&missing), "--replay", s(&replay)]);
    assert_eq!(code(&o), 2);
    // Replaying another contract's answers misses, which fails the pipeline.
    let wrong = f.join("replay/capped_token_safe.json");
    let kb = f.join("kb/kb.jsonl");
    let o = run(&["analyze", "--contract", s(&contract), "--kb", s(&kb), "--replay", s(&wrong)]);
    assert_eq!(code(&o), 1);
}

#[test]
fn config_document_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let f = fixtures();
    let config = dir.path().join("run.json");
    let doc = serde_json::json!({
        "kb_path": f.join("kb/kb.jsonl"),
        "fixture_path": f.join("replay/swap_fixed_min.json"),
        "weights": "infer",
        "output_path": dir.path().join("report.json"),
    });
    std::fs::write(&config, doc.to_string()).unwrap();
    let contract = f.join("contracts/swap_fixed_min.sol");
    let o = run(&["analyze", "--config", s(&config), "--contract", s(&contract)]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("report.json").is_file());
    std::fs::write(&config, r#"{"no_such_key": 1}"#).unwrap();
    let o = run(&["analyze", "--config", s(&config), "--contract", s(&contract)]);
    assert_eq!(code(&o), 2);
}

fn sweep(dir: &Path, out: &Path, steps: &str) -> (i32, Option<SweepReport>) {
    let o = run(&["sweep", "--fixtures", s(dir), "--out", s(out), "--steps", steps]);
    let report = out
        .is_file()
        .then(|| serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap());
    (code(&o), report)
}

#[test]
fn sweep_default_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.json");
    let (c, report) = sweep(&fixtures().join("sweep/labeled"), &out, "5");
    assert_eq!(c, 0);
    let report = report.unwrap();
    assert_eq!(report.families.len(), 5);
    assert!(report.families.iter().all(|f| f.settings.len() == 11));
    let table = std::fs::read_to_string(dir.path().join("sweep.json.txt")).unwrap();
    assert_eq!(table.lines().count(), 2 + 5 * 12);
}

#[test]
fn sweep_single_point_has_zero_deltas() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.json");
    let report = sweep(&fixtures().join("sweep/labeled"), &out, "0").1.unwrap();
    for f in &report.families {
        assert_eq!(f.settings.len(), 1);
        assert_eq!(f.mean_abs_delta.precision, 0.0);
        assert_eq!(f.mean_abs_delta.recall, 0.0);
        assert_eq!(f.mean_abs_delta.f1, 0.0);
    }
}

#[test]
fn sweep_step_fixture_is_monotone_in_tau() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.json");
    let report = sweep(&fixtures().join("sweep/step"), &out, "5").1.unwrap();
    let tau_o = report.families.iter().find(|f| f.family.label() == "tau_o").unwrap();
    let sizes: Vec<usize> = tau_o.settings.iter().map(|st| st.metrics.flagged).collect();
    assert!(sizes.windows(2).all(|w| w[0] <= w[1]), "{sizes:?}");
    // Every composite is 0.95: flagged once the threshold passes it.
    for st in &tau_o.settings {
        assert_eq!(st.metrics.flagged, if st.value > 0.95 { 20 } else { 0 }, "{}", st.value);
    }
}

#[test]
fn sweep_empty_fixture_set() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty");
    std::fs::create_dir(&empty).unwrap();
    let (c, report) = sweep(&empty, &dir.path().join("o.json"), "5");
    assert_eq!(c, 2);
    assert!(report.is_none());
}

#[test]
fn report_renders_and_passes_json_through() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    assert_eq!(code(&analyze("swap_fixed_min", &out)), 3);
    let text = run(&["report", "--in", s(&out), "--format", "text"]);
    assert_eq!(code(&text), 0);
    let text = String::from_utf8(text.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("VIOLATION")).count(), 1);
    let json = run(&["report", "--in", s(&out), "--format", "json"]);
    assert_eq!(json.stdout, std::fs::read(&out).unwrap());

    let empty = dir.path().join("empty.json");
    std::fs::write(&empty, AnalysisReport::new(vec![]).to_json()).unwrap();
    let o = run(&["report", "--in", s(&empty)]);
    assert!(String::from_utf8(o.stdout).unwrap().contains("0 violations"));

    assert_eq!(code(&run(&["report", "--in", s(&dir.path().join("missing.json"))])), 2);
    std::fs::write(&empty, "not json").unwrap();
    assert_eq!(code(&run(&["report", "--in", s(&empty)])), 2);
}
