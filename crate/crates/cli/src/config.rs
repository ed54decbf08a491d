//! Application configuration: a TOML file whose fields can each be
//! overridden by a `METAINF_`-prefixed environment variable.

use std::path::{Path, PathBuf};

use metainf_core::embedding::{EmbeddingProviderSpec, PromptStyle, ProviderKind};
use metainf_core::selectors::SelectorKind;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    /// Record store file (see `metainf ingest`).
    pub record_store: PathBuf,
    /// Directory holding the trained snapshot.
    pub model_store: PathBuf,
    pub provider: EmbeddingProviderSpec,
    pub style: PromptStyle,
    pub rank: usize,
    pub selector: SelectorKind,
    pub bind: String,
    pub request_timeout_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub default_budget: Option<f64>,
}

impl Default for AppConfig {
    fn default() -> Self {
        AppConfig {
            record_store: PathBuf::from("metainf-records.json"),
            model_store: PathBuf::from("metainf-models"),
            provider: EmbeddingProviderSpec::default(),
            style: PromptStyle::Rich,
            rank: 64,
            selector: SelectorKind::Metainf,
            bind: "127.0.0.1:8080".into(),
            request_timeout_s: 30.0,
            default_budget: None,
        }
    }
}

/// Environment variables understood by [`AppConfig::apply_env`].
pub const ENV_KEYS: [&str; 13] = [
    "METAINF_RECORD_STORE",
    "METAINF_MODEL_STORE",
    "METAINF_STYLE",
    "METAINF_RANK",
    "METAINF_SELECTOR",
    "METAINF_BIND",
    "METAINF_REQUEST_TIMEOUT_S",
    "METAINF_DEFAULT_BUDGET",
    "METAINF_EMBED_KIND",
    "METAINF_EMBED_ENDPOINT",
    "METAINF_EMBED_MODEL",
    "METAINF_EMBED_TIMEOUT_S",
    "METAINF_EMBED_RAW_DIM",
];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> CliResult<T>
where
    T::Err: std::fmt::Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| CliError::Usage(format!("{key}={value}: {e}")))
}

impl AppConfig {
    /// Reads `path` if given, then applies environment overrides.
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?;
                toml::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", p.display())))?
            }
            None => AppConfig::default(),
        };
        cfg.apply_env(|k| std::env::var(k).ok())?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies overrides from `lookup`, which maps variable names to values.
    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) -> CliResult<()> {
        for key in ENV_KEYS {
            let Some(v) = lookup(key) else { continue };
            match key {
                "METAINF_RECORD_STORE" => self.record_store = v.into(),
                "METAINF_MODEL_STORE" => self.model_store = v.into(),
                "METAINF_STYLE" => self.style = parse(key, &v)?,
                "METAINF_RANK" => self.rank = parse(key, &v)?,
                "METAINF_SELECTOR" => self.selector = parse(key, &v)?,
                "METAINF_BIND" => self.bind = v,
                "METAINF_REQUEST_TIMEOUT_S" => self.request_timeout_s = parse(key, &v)?,
                "METAINF_DEFAULT_BUDGET" => {
                    self.default_budget = match v.trim() {
                        "" | "none" | "unlimited" => None,
                        s => Some(parse(key, s)?),
                    }
                }
                "METAINF_EMBED_KIND" => {
                    self.provider.kind = match v.trim() {
                        "http" => ProviderKind::Http,
                        "fallback" => ProviderKind::Fallback,
                        other => return Err(CliError::Usage(format!("{key}: unknown provider kind `{other}`"))),
                    }
                }
                "METAINF_EMBED_ENDPOINT" => {
                    if !v.trim().is_empty() {
                        self.provider.kind = ProviderKind::Http;
                        self.provider.endpoint = Some(v);
                    }
                }
                "METAINF_EMBED_MODEL" => self.provider.model_name = v,
                "METAINF_EMBED_TIMEOUT_S" => self.provider.timeout_s = parse(key, &v)?,
                "METAINF_EMBED_RAW_DIM" => self.provider.raw_dim = parse(key, &v)?,
                _ => unreachable!("key list and match arms agree"),
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.rank == 0 {
            return Err(CliError::Usage("rank must be >= 1".into()));
        }
        if !(self.request_timeout_s > 0.0) {
            return Err(CliError::Usage("request_timeout_s must be positive".into()));
        }
        if let Some(b) = self.default_budget {
            if !(b >= 0.0) {
                return Err(CliError::Usage("default_budget must be non-negative".into()));
            }
        }
        for (name, path) in [("record_store", &self.record_store), ("model_store", &self.model_store)] {
            if path.as_os_str().is_empty() {
                return Err(CliError::Usage(format!("{name} path is empty")));
            }
            let parent = path.parent().filter(|p| !p.as_os_str().is_empty());
            if let Some(parent) = parent {
                if !parent.is_dir() {
                    return Err(CliError::Usage(format!(
                        "{name}: directory {} does not exist",
                        parent.display()
                    )));
                }
            }
        }
        self.provider.validate().map_err(|e| CliError::Usage(format!("provider: {e}")))
    }
}
