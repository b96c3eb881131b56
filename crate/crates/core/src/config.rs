//! Run configuration: a single JSON document whose keys command-line flags may override.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::detection::{CheckerParams, ParamError};
use crate::llm::DEFAULT_MAX_CONCURRENT;

/// Where signature weights come from.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub enum WeightsMode {
    /// Inferred from the knowledge base, cached next to it.
    #[default]
    Infer,
    /// The shipped default weights.
    Default,
    /// A JSON file holding a `SignatureWeights` document.
    File(PathBuf),
}

impl fmt::Display for WeightsMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightsMode::Infer => f.write_str("infer"),
            WeightsMode::Default => f.write_str("default"),
            WeightsMode::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

impl FromStr for WeightsMode {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "infer" => Ok(WeightsMode::Infer),
            "default" => Ok(WeightsMode::Default),
            _ => match s.strip_prefix("file:") {
                Some(p) if !p.is_empty() => Ok(WeightsMode::File(PathBuf::from(p))),
                _ => Err(ConfigError::Invalid(format!("weights mode `{s}` is not infer, default or file:PATH"))),
            },
        }
    }
}

impl Serialize for WeightsMode {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for WeightsMode {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Http,
    #[default]
    Replay,
}

impl FromStr for BackendKind {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "http" => Ok(BackendKind::Http),
            "replay" => Ok(BackendKind::Replay),
            _ => Err(ConfigError::Invalid(format!("backend `{s}` is not http or replay"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub kb_path: Option<PathBuf>,
    pub weights: WeightsMode,
    pub checker: CheckerParams,
    pub backend: BackendKind,
    /// Replay fixture store; also the target of recording runs.
    pub fixture_path: Option<PathBuf>,
    /// Compiler executable for `.sol` inputs. Without one, `.sol` files are
    /// read from their pre-compiled `<file>.ast.json` neighbours.
    pub compiler_path: Option<PathBuf>,
    pub output_path: Option<PathBuf>,
    pub max_concurrent_requests: usize,
    pub base_url: Option<String>,
    pub model: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            kb_path: None,
            weights: WeightsMode::Infer,
            checker: CheckerParams::default(),
            backend: BackendKind::Replay,
            fixture_path: None,
            compiler_path: None,
            output_path: None,
            max_concurrent_requests: DEFAULT_MAX_CONCURRENT,
            base_url: None,
            model: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config {path} is malformed: {reason}")]
    Malformed { path: PathBuf, reason: String },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Params(#[from] ParamError),
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| ConfigError::Malformed {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.checker.validate()?;
        if self.max_concurrent_requests == 0 {
            return Err(ConfigError::Invalid("max_concurrent_requests must be at least 1".into()));
        }
        match self.backend {
            BackendKind::Replay if self.fixture_path.is_none() => {
                Err(ConfigError::Invalid("the replay backend needs a fixture path".into()))
            }
            BackendKind::Http if self.base_url.is_none() || self.model.is_none() => {
                Err(ConfigError::Invalid("the http backend needs a base URL and a model name".into()))
            }
            _ => Ok(()),
        }
    }
}
