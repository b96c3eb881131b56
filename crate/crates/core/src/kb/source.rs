//! Ingestion of reusable-component sources from a local directory tree.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::compiler::{load_contract, SolidityCompiler};
use crate::features::ContractModel;

/// Where a component source came from. Taken from the first directory level
/// under the ingestion root: `frequency_top/` and `incident_derived/` map to
/// their origins, anything else is `Local`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Origin {
    FrequencyTop,
    IncidentDerived,
    Local,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScrSourceUnit {
    /// Path relative to the ingestion root, `/`-separated.
    pub id: String,
    pub origin: Origin,
    pub path: PathBuf,
    pub source_text: String,
    pub compiled_model: ContractModel,
}

#[derive(Debug, Clone, Default)]
pub struct IngestReport {
    pub units: Vec<ScrSourceUnit>,
    /// Files that were found but could not be compiled, with the reason.
    pub skipped: Vec<(String, String)>,
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("no .sol files under {0}")]
    NoSources(PathBuf),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn collect_sol_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), IngestError> {
    let entries = std::fs::read_dir(dir).map_err(|source| IngestError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    for entry in entries {
        let path = entry
            .map_err(|source| IngestError::Io {
                path: dir.to_path_buf(),
                source,
            })?
            .path();
        if path.is_dir() {
            collect_sol_files(&path, out)?;
        } else if path.extension().and_then(|e| e.to_str()) == Some("sol") {
            out.push(path);
        }
    }
    Ok(())
}

fn origin_of(relative: &Path) -> Origin {
    let mut comps = relative.components();
    let first = comps.next().and_then(|c| c.as_os_str().to_str());
    if comps.next().is_none() {
        return Origin::Local;
    }
    match first {
        Some("frequency_top") => Origin::FrequencyTop,
        Some("incident_derived") => Origin::IncidentDerived,
        _ => Origin::Local,
    }
}

/// Compiles every `.sol` file under `root` (recursively, in path order). Files
/// that fail to compile are logged and reported as skipped.
pub fn ingest_sources(root: &Path, compiler: &dyn SolidityCompiler) -> Result<IngestReport, IngestError> {
    let mut files = Vec::new();
    collect_sol_files(root, &mut files)?;
    if files.is_empty() {
        return Err(IngestError::NoSources(root.to_path_buf()));
    }
    files.sort();
    let mut report = IngestReport::default();
    for path in files {
        let relative = path.strip_prefix(root).unwrap_or(&path).to_path_buf();
        let id = relative
            .components()
            .map(|c| c.as_os_str().to_string_lossy().into_owned())
            .collect::<Vec<_>>()
            .join("/");
        let text = match std::fs::read_to_string(&path) {
            Ok(t) if !t.trim().is_empty() => t,
            Ok(_) => {
                log::warn!("skipping {id}: empty source");
                report.skipped.push((id, "empty source".into()));
                continue;
            }
            Err(e) => {
                log::warn!("skipping {id}: {e}");
                report.skipped.push((id, e.to_string()));
                continue;
            }
        };
        match load_contract(&path, compiler) {
            Ok(model) => {
                log::info!("ingested {id}: {} contract(s)", model.contracts.len());
                report.units.push(ScrSourceUnit {
                    origin: origin_of(&relative),
                    id,
                    path,
                    source_text: text,
                    compiled_model: model,
                });
            }
            Err(e) => {
                log::warn!("skipping {id}: {e}");
                report.skipped.push((id, e.to_string()));
            }
        }
    }
    Ok(report)
}
