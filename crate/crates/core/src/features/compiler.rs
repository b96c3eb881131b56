//! Compiler front end: runs a Solidity compiler in standard-json mode and turns
//! its AST output into a [`ContractModel`].

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use serde_json::{json, Value};
use thiserror::Error;

use super::ast::{load_contract_ast_value, pragma_series, source_pragma, AstError};
use super::model::ContractModel;

#[derive(Debug, Error)]
pub enum CompileError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("compiler `{program}` could not be started: {source}")]
    Spawn {
        program: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("compiler output is not JSON: {0}")]
    BadOutput(String),
    #[error("compilation failed: {0}")]
    Failed(String),
    #[error(transparent)]
    Ast(#[from] AstError),
}

/// Anything able to turn a source file into standard-json compiler output.
pub trait SolidityCompiler: Send + Sync {
    fn compile(&self, path: &Path) -> Result<Value, CompileError>;
}

/// A compiler executable driven through `--standard-json`. The program is
/// chosen per file from the pragma's compiler series when a matching entry is
/// configured, falling back to the default program.
#[derive(Debug, Clone)]
pub struct SolcCommand {
    pub program: PathBuf,
    pub by_series: BTreeMap<(u64, u64), PathBuf>,
}

impl SolcCommand {
    pub fn new(program: impl Into<PathBuf>) -> Self {
        SolcCommand {
            program: program.into(),
            by_series: BTreeMap::new(),
        }
    }

    pub fn with_series(mut self, series: (u64, u64), program: impl Into<PathBuf>) -> Self {
        self.by_series.insert(series, program.into());
        self
    }

    pub fn program_for(&self, source: &str) -> &Path {
        source_pragma(source)
            .and_then(|p| pragma_series(&p))
            .and_then(|s| self.by_series.get(&s))
            .unwrap_or(&self.program)
    }
}

fn read(path: &Path) -> Result<String, CompileError> {
    std::fs::read_to_string(path).map_err(|source| CompileError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses compiler stdout, skipping any banner lines printed before the JSON document.
pub fn parse_compiler_output(stdout: &str) -> Result<Value, CompileError> {
    let start = stdout
        .lines()
        .scan(0usize, |offset, line| {
            let here = *offset;
            *offset += line.len() + 1;
            Some((here, line))
        })
        .find(|(_, l)| l.trim_start().starts_with('{'))
        .map(|(o, _)| o)
        .ok_or_else(|| CompileError::BadOutput(stdout.chars().take(200).collect()))?;
    serde_json::from_str(&stdout[start..]).map_err(|e| CompileError::BadOutput(e.to_string()))
}

/// Error messages of severity `error` in compiler output, if any.
pub fn compiler_errors(output: &Value) -> Option<String> {
    let errs: Vec<String> = output
        .get("errors")
        .and_then(Value::as_array)?
        .iter()
        .filter(|e| e.get("severity").and_then(Value::as_str) == Some("error"))
        .filter_map(|e| e.get("formattedMessage").or_else(|| e.get("message")))
        .filter_map(Value::as_str)
        .map(|s| s.trim().to_string())
        .collect();
    (!errs.is_empty()).then(|| errs.join("; "))
}

impl SolidityCompiler for SolcCommand {
    fn compile(&self, path: &Path) -> Result<Value, CompileError> {
        let text = read(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let input = json!({
            "language": "Solidity",
            "sources": { name.clone(): { "content": text } },
            "settings": { "outputSelection": { "*": { "": ["ast"] } } }
        });
        let program = self.program_for(&text).to_path_buf();
        let mut child = Command::new(&program)
            .arg("--standard-json")
            .arg("--base-path")
            .arg(base)
            .arg("--allow-paths")
            .arg(base)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|source| CompileError::Spawn {
                program: program.clone(),
                source,
            })?;
        if let Some(mut stdin) = child.stdin.take() {
            stdin
                .write_all(input.to_string().as_bytes())
                .map_err(|source| CompileError::Spawn {
                    program: program.clone(),
                    source,
                })?;
        }
        let out = child.wait_with_output().map_err(|source| CompileError::Spawn {
            program: program.clone(),
            source,
        })?;
        let value = parse_compiler_output(&String::from_utf8_lossy(&out.stdout))?;
        if let Some(msg) = compiler_errors(&value) {
            return Err(CompileError::Failed(msg));
        }
        Ok(value)
    }
}

/// Stands in for a compiler by reading `<file>.ast.json` stored next to each
/// source file. Lets analyses run where no compiler binary is installed.
#[derive(Debug, Clone, Copy, Default)]
pub struct PrecompiledAst;

impl SolidityCompiler for PrecompiledAst {
    fn compile(&self, path: &Path) -> Result<Value, CompileError> {
        let mut name = path.as_os_str().to_owned();
        name.push(".ast.json");
        let ast = PathBuf::from(name);
        let value = parse_compiler_output(&read(&ast)?)?;
        if let Some(msg) = compiler_errors(&value) {
            return Err(CompileError::Failed(msg));
        }
        Ok(value)
    }
}

/// Source texts for every unit named in compiler output, resolved against `base`.
fn source_texts(output: &Value, base: &Path) -> BTreeMap<String, String> {
    let mut texts = BTreeMap::new();
    if let Some(sources) = output.get("sources").and_then(Value::as_object) {
        for (name, entry) in sources {
            let path = entry
                .get("ast")
                .and_then(|a| a.get("absolutePath"))
                .and_then(Value::as_str)
                .unwrap_or(name);
            if let Ok(t) = std::fs::read_to_string(base.join(path)) {
                texts.insert(path.to_string(), t);
            }
        }
    }
    texts
}

/// Compiles a `.sol` file into a model, attaching source texts for line lookups.
pub fn compile_to_model(compiler: &dyn SolidityCompiler, path: &Path) -> Result<ContractModel, CompileError> {
    let output = compiler.compile(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    Ok(load_contract_ast_value(&output, &source_texts(&output, base))?)
}

/// Loads a pre-compiled AST JSON file; source texts are looked up next to it.
pub fn load_ast_file(path: &Path) -> Result<ContractModel, CompileError> {
    let text = read(path)?;
    let output: Value =
        serde_json::from_str(&text).map_err(|e| AstError::MalformedAst(e.to_string()))?;
    if let Some(msg) = compiler_errors(&output) {
        return Err(CompileError::Failed(msg));
    }
    let base = path.parent().unwrap_or(Path::new("."));
    Ok(load_contract_ast_value(&output, &source_texts(&output, base))?)
}

/// Loads a contract from either Solidity source (compiled) or AST JSON.
pub fn load_contract(path: &Path, compiler: &dyn SolidityCompiler) -> Result<ContractModel, CompileError> {
    if path.extension().and_then(|e| e.to_str()) == Some("json") {
        load_ast_file(path)
    } else {
        compile_to_model(compiler, path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn skips_banner_before_json() {
        let out = ">>> Cannot retry compilation with SMT\n{\"sources\":{}}\n";
        assert_eq!(parse_compiler_output(out).unwrap(), json!({"sources": {}}));
        assert!(parse_compiler_output("no json here").is_err());
    }

    #[test]
    fn only_error_severity_fails() {
        let warn = json!({"errors": [{"severity": "warning", "message": "w"}]});
        assert_eq!(compiler_errors(&warn), None);
        let err = json!({"errors": [{"severity": "error", "message": "boom"}]});
        assert_eq!(compiler_errors(&err).as_deref(), Some("boom"));
    }

    #[test]
    fn program_selection_by_pragma() {
        let c = SolcCommand::new("solc").with_series((0, 6), "solc-0.6");
        assert_eq!(c.program_for("pragma solidity ^0.6.12;"), Path::new("solc-0.6"));
        assert_eq!(c.program_for("pragma solidity ^0.8.0;"), Path::new("solc"));
    }
}
