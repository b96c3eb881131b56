//! The four subcommands and the configuration plumbing they share.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use rayon::prelude::*;

use scrcheck_core::detection::{sweep_families, LabeledScores, SweepFamily, SweepReport};
use scrcheck_core::features::{load_contract, PrecompiledAst, SolcCommand, SolidityCompiler};
use scrcheck_core::inspector::SnapshotRepository;
use scrcheck_core::kb::{build_records, ingest_sources, load_kb, store_kb};
use scrcheck_core::llm::{
    FixtureStore, HttpBackend, HttpConfig, LlmBackend, RecordingBackend, ReplayBackend, Throttled, API_KEY_ENV,
};
use scrcheck_core::report::{render_text, AnalysisReport, ContractReport};
use scrcheck_core::retrieval::{infer_signature_weights, read_cached_weights, write_cached_weights};
use scrcheck_core::util::write_atomic;
use scrcheck_core::{analyze_model, Analyzer, BackendKind, KnowledgeBase, RunConfig, SignatureWeights, WeightsMode};

use crate::GlobalArgs;

/// A command error with the exit status it maps to.
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

/// Exit status for a failed pipeline run or backend.
const EXIT_FAILURE: u8 = 1;
/// Exit status for missing or unusable inputs.
const EXIT_INPUT: u8 = 2;
/// Exit status of `analyze` when at least one violation is confirmed.
const EXIT_VIOLATIONS: u8 = 3;

fn fail(code: u8) -> impl FnOnce(anyhow::Error) -> Failure {
    move |error| Failure { code, error }
}

trait OrExit<T> {
    fn or_exit(self, code: u8) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> OrExit<T> for Result<T, E> {
    fn or_exit(self, code: u8) -> Result<T, Failure> {
        self.map_err(|e| fail(code)(e.into()))
    }
}

/// The config document (or defaults) with command-line overrides applied.
fn run_config(global: &GlobalArgs) -> Result<RunConfig, Failure> {
    let mut config = match &global.config {
        Some(path) => RunConfig::load(path).or_exit(EXIT_INPUT)?,
        None => RunConfig::default(),
    };
    if let Some(w) = &global.weights {
        config.weights = w.parse().or_exit(EXIT_INPUT)?;
    }
    if let Some(b) = &global.backend {
        config.backend = b.parse().or_exit(EXIT_INPUT)?;
    }
    if let Some(p) = &global.replay {
        config.fixture_path = Some(p.clone());
    }
    if let Some(p) = &global.compiler {
        config.compiler_path = Some(p.clone());
    }
    if let Some(u) = &global.base_url {
        config.base_url = Some(u.clone());
    }
    if let Some(m) = &global.model {
        config.model = Some(m.clone());
    }
    if let Some(n) = global.max_concurrent {
        config.max_concurrent_requests = n;
    }
    Ok(config)
}

fn compiler(config: &RunConfig) -> Box<dyn SolidityCompiler> {
    match &config.compiler_path {
        Some(p) => Box::new(SolcCommand::new(p)),
        None => Box::new(PrecompiledAst),
    }
}

/// The configured model backend. A live backend given a fixture path records
/// every exchange into it.
enum Backend {
    Replay(ReplayBackend),
    Http(Throttled<HttpBackend>),
    Recording(RecordingBackend<Throttled<HttpBackend>>, PathBuf),
}

impl Backend {
    fn from_config(config: &RunConfig) -> Result<Self, Failure> {
        config.validate().or_exit(EXIT_INPUT)?;
        match config.backend {
            BackendKind::Replay => {
                let path = config.fixture_path.as_deref().expect("validated");
                Ok(Backend::Replay(ReplayBackend::from_path(path, true).or_exit(EXIT_INPUT)?))
            }
            BackendKind::Http => {
                let http = HttpConfig::from_env(
                    config.base_url.as_deref().expect("validated"),
                    config.model.as_deref().expect("validated"),
                );
                if http.api_key.is_none() {
                    log::warn!("{API_KEY_ENV} is not set; requests are sent without credentials");
                }
                let live = Throttled::new(HttpBackend::new(http).or_exit(EXIT_FAILURE)?, config.max_concurrent_requests);
                match &config.fixture_path {
                    Some(path) => {
                        let store = FixtureStore::load_or_empty(path).or_exit(EXIT_INPUT)?;
                        Ok(Backend::Recording(RecordingBackend::with_store(live, store), path.clone()))
                    }
                    None => Ok(Backend::Http(live)),
                }
            }
        }
    }

    fn as_dyn(&self) -> &dyn LlmBackend {
        match self {
            Backend::Replay(b) => b,
            Backend::Http(b) => b,
            Backend::Recording(b, _) => b,
        }
    }

    /// Saves recorded exchanges, if any.
    fn finish(self) -> Result<(), Failure> {
        if let Backend::Recording(b, path) = self {
            b.into_store().save(&path).or_exit(EXIT_FAILURE)?;
            log::info!("recorded fixtures saved to {}", path.display());
        }
        Ok(())
    }
}

pub fn build_kb(global: &GlobalArgs, sources: &Path, out: Option<PathBuf>) -> Result<u8, Failure> {
    let config = run_config(global)?;
    let out = out
        .or_else(|| config.kb_path.clone())
        .ok_or_else(|| fail(EXIT_INPUT)(anyhow!("no output path: pass --out or set kb_path")))?;
    let compiler = compiler(&config);
    let ingest = ingest_sources(sources, compiler.as_ref()).or_exit(EXIT_INPUT)?;
    for (file, reason) in &ingest.skipped {
        log::warn!("skipped {file}: {reason}");
    }
    let backend = Backend::from_config(&config)?;
    let built = build_records(&ingest.units, backend.as_dyn(), Some(compiler.as_ref())).or_exit(EXIT_FAILURE)?;
    backend.finish()?;
    for unit in &ingest.units {
        let n = built.records.iter().filter(|r| r.id.starts_with(&format!("{}::", unit.id))).count();
        log::info!("{}: {n} record(s)", unit.id);
    }
    for d in &built.diagnostics {
        log::warn!("{d}");
    }
    if built.records.is_empty() {
        return Err(fail(EXIT_FAILURE)(anyhow!("no records were built from {}", sources.display())));
    }
    store_kb(&built.records, &out).or_exit(EXIT_FAILURE)?;
    let kb_bytes = std::fs::read(&out).or_exit(EXIT_FAILURE)?;
    match infer_signature_weights(&KnowledgeBase::new(built.records.clone())) {
        Ok(w) => write_cached_weights(&out, &kb_bytes, &w).or_exit(EXIT_FAILURE)?,
        Err(e) => log::warn!("signature weights not cached: {e}"),
    }
    eprintln!(
        "wrote {} record(s) from {} unit(s) to {} ({} file(s) skipped)",
        built.records.len(),
        ingest.units.len(),
        out.display(),
        ingest.skipped.len()
    );
    Ok(0)
}

fn weights_for(mode: &WeightsMode, kb_path: &Path, kb: &KnowledgeBase) -> Result<SignatureWeights, Failure> {
    match mode {
        WeightsMode::Default => Ok(SignatureWeights::default()),
        WeightsMode::File(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("cannot read weights {}", p.display()))
                .or_exit(EXIT_INPUT)?;
            let w: SignatureWeights = serde_json::from_str(&text)
                .with_context(|| format!("malformed weights {}", p.display()))
                .or_exit(EXIT_INPUT)?;
            if !w.is_valid() {
                return Err(fail(EXIT_INPUT)(anyhow!("weights in {} do not form two groups of 0.5", p.display())));
            }
            Ok(w)
        }
        WeightsMode::Infer => {
            let bytes = std::fs::read(kb_path).or_exit(EXIT_INPUT)?;
            if let Some(w) = read_cached_weights(kb_path, &bytes) {
                return Ok(w);
            }
            let w = infer_signature_weights(kb).or_exit(EXIT_FAILURE)?;
            if let Err(e) = write_cached_weights(kb_path, &bytes, &w) {
                log::warn!("cannot cache signature weights: {e}");
            }
            Ok(w)
        }
    }
}

fn label(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn output_sidecar(out: &Path, suffix: &str) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(suffix);
    PathBuf::from(name)
}

pub fn analyze(global: &GlobalArgs, contracts: &[PathBuf], kb: Option<PathBuf>, out: Option<PathBuf>) -> Result<u8, Failure> {
    let config = run_config(global)?;
    let kb_path = kb
        .or_else(|| config.kb_path.clone())
        .ok_or_else(|| fail(EXIT_INPUT)(anyhow!("no knowledge base: pass --kb or set kb_path")))?;
    if !kb_path.is_file() {
        return Err(fail(EXIT_INPUT)(anyhow!("knowledge base {} not found", kb_path.display())));
    }
    let kb = load_kb(&kb_path).or_exit(EXIT_FAILURE)?;
    let weights = weights_for(&config.weights, &kb_path, &kb)?;
    let backend = Backend::from_config(&config)?;
    let compiler = compiler(&config);
    let analyzer = Analyzer {
        kb: &kb,
        weights: &weights,
        params: &config.checker,
        backend: backend.as_dyn(),
    };
    // One snapshot repository per contract keeps ids independent of scheduling.
    let results: Vec<(ContractReport, SnapshotRepository)> = contracts
        .par_iter()
        .map(|path| {
            let model = load_contract(path, compiler.as_ref())
                .with_context(|| format!("cannot load {}", path.display()))?;
            let repo = SnapshotRepository::new();
            let report = analyze_model(&label(path), &model, &analyzer, &repo)
                .with_context(|| format!("analysis of {} failed", path.display()))?;
            Ok((report, repo))
        })
        .collect::<anyhow::Result<_>>()
        .or_exit(EXIT_FAILURE)?;
    backend.finish()?;
    let mut snapshot_lines = String::new();
    for (report, repo) in &results {
        for s in repo.snapshots() {
            let line = serde_json::json!({"contract": report.contract, "snapshot": s});
            snapshot_lines.push_str(&line.to_string());
            snapshot_lines.push('\n');
        }
    }
    let report = AnalysisReport::new(results.into_iter().map(|(r, _)| r).collect());
    let json = report.to_json();
    match out.or_else(|| config.output_path.clone()) {
        Some(path) => {
            write_atomic(&path, json.as_bytes()).or_exit(EXIT_FAILURE)?;
            write_atomic(&output_sidecar(&path, ".snapshots.jsonl"), snapshot_lines.as_bytes()).or_exit(EXIT_FAILURE)?;
        }
        None => print!("{json}"),
    }
    let s = &report.summary;
    eprintln!(
        "{} violation(s), {} conflict(s) discarded, {} similarity rejected, {} inspector dropped, {} candidate(s)",
        s.violations, s.conflicts_discarded, s.similarity_rejected, s.inspector_dropped, s.candidates
    );
    Ok(if s.violations > 0 { EXIT_VIOLATIONS } else { 0 })
}

/// Every labeled item in the `*.json` files of `dir`, in file-name order.
fn read_score_sets(dir: &Path) -> Result<Vec<LabeledScores>, Failure> {
    let entries = std::fs::read_dir(dir)
        .with_context(|| format!("cannot read fixture directory {}", dir.display()))
        .or_exit(EXIT_INPUT)?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    files.sort();
    let mut items = Vec::new();
    for f in files {
        let text = std::fs::read_to_string(&f).or_exit(EXIT_FAILURE)?;
        let set: Vec<LabeledScores> = serde_json::from_str(&text)
            .with_context(|| format!("{} is not a labeled score set", f.display()))
            .or_exit(EXIT_FAILURE)?;
        items.extend(set);
    }
    Ok(items)
}

pub fn sweep(global: &GlobalArgs, fixtures: &Path, out: Option<PathBuf>, steps: u32) -> Result<u8, Failure> {
    let config = run_config(global)?;
    config.checker.validate().or_exit(EXIT_INPUT)?;
    let items = read_score_sets(fixtures)?;
    let steps = i32::try_from(steps).or_exit(EXIT_INPUT)?;
    let report: SweepReport = sweep_families(&config.checker, &items, &SweepFamily::ALL, steps).or_exit(EXIT_INPUT)?;
    let mut json = serde_json::to_string_pretty(&report).or_exit(EXIT_FAILURE)?;
    json.push('\n');
    let table = report.to_table();
    match out {
        Some(path) => {
            write_atomic(&path, json.as_bytes()).or_exit(EXIT_FAILURE)?;
            write_atomic(&output_sidecar(&path, ".txt"), table.as_bytes()).or_exit(EXIT_FAILURE)?;
            eprint!("{table}");
        }
        None => print!("{json}"),
    }
    Ok(0)
}

pub fn report(input: &Path, json: bool) -> Result<u8, Failure> {
    let text = std::fs::read_to_string(input)
        .with_context(|| format!("cannot read {}", input.display()))
        .or_exit(EXIT_INPUT)?;
    let report = AnalysisReport::from_json(&text)
        .map_err(|e| anyhow!("{} is not an analysis report: {e}", input.display()))
        .or_exit(EXIT_INPUT)?;
    if json {
        print!("{}", report.to_json());
    } else {
        print!("{}", render_text(&report));
    }
    Ok(0)
}
