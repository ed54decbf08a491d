//! Raw text embeddings: an HTTP embeddings endpoint or a deterministic
//! hash-seeded fallback, behind a cache keyed by text hash.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};
use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::domain::{EmbeddingProvenance, EmbeddingVector, EntityKind};
use crate::error::{Error, Result};

pub const DEFAULT_RAW_DIM: usize = 384;

/// Environment variable that overrides the configured endpoint.
pub const ENDPOINT_ENV: &str = "METAINF_EMBED_ENDPOINT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    Http,
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingProviderSpec {
    pub kind: ProviderKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    pub model_name: String,
    pub timeout_s: f64,
    pub raw_dim: usize,
}

impl Default for EmbeddingProviderSpec {
    fn default() -> Self {
        EmbeddingProviderSpec::fallback(DEFAULT_RAW_DIM)
    }
}

impl EmbeddingProviderSpec {
    pub fn fallback(raw_dim: usize) -> Self {
        EmbeddingProviderSpec {
            kind: ProviderKind::Fallback,
            endpoint: None,
            model_name: "hash-fallback".into(),
            timeout_s: 10.0,
            raw_dim,
        }
    }

    pub fn http(endpoint: impl Into<String>, model_name: impl Into<String>, raw_dim: usize) -> Self {
        EmbeddingProviderSpec {
            kind: ProviderKind::Http,
            endpoint: Some(endpoint.into()),
            model_name: model_name.into(),
            timeout_s: 10.0,
            raw_dim,
        }
    }

    /// Applies the `METAINF_EMBED_ENDPOINT` override, switching to HTTP.
    pub fn with_env_override(mut self) -> Self {
        if let Ok(endpoint) = std::env::var(ENDPOINT_ENV) {
            if !endpoint.trim().is_empty() {
                self.kind = ProviderKind::Http;
                self.endpoint = Some(endpoint);
            }
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.raw_dim == 0 {
            return Err(Error::invalid("raw_dim must be positive"));
        }
        if !(self.timeout_s > 0.0) {
            return Err(Error::invalid("timeout_s must be positive"));
        }
        if self.kind == ProviderKind::Http && self.endpoint.as_deref().is_none_or(str::is_empty) {
            return Err(Error::invalid("http provider requires an endpoint"));
        }
        Ok(())
    }
}

/// Deterministic pseudo-embedding: a ChaCha20 stream seeded with
/// SHA-256(text, raw_dim) yields `raw_dim` standard normals, normalized to
/// unit length.
pub fn fallback_embedding(text: &str, raw_dim: usize) -> Vec<f64> {
    let mut hasher = Sha256::new();
    hasher.update(b"metainf-fallback-v1\0");
    hasher.update((text.len() as u64).to_le_bytes());
    hasher.update(text.as_bytes());
    hasher.update((raw_dim as u64).to_le_bytes());
    let seed: [u8; 32] = hasher.finalize().into();
    let mut rng = ChaCha20Rng::from_seed(seed);
    let mut v: Vec<f64> = (0..raw_dim).map(|_| StandardNormal.sample(&mut rng)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

#[derive(Serialize)]
struct EmbeddingRequest<'a> {
    model: &'a str,
    input: [&'a str; 1],
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    embedding: Vec<f64>,
}

/// Provider with a concurrent text-hash cache.
pub struct Embedder {
    spec: EmbeddingProviderSpec,
    agent: Option<ureq::Agent>,
    cache: RwLock<HashMap<[u8; 32], Arc<Vec<f64>>>>,
}

impl std::fmt::Debug for Embedder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Embedder").field("spec", &self.spec).finish_non_exhaustive()
    }
}

impl Embedder {
    pub fn new(spec: EmbeddingProviderSpec) -> Result<Self> {
        spec.validate()?;
        let agent = (spec.kind == ProviderKind::Http).then(|| {
            let config = ureq::Agent::config_builder()
                .timeout_global(Some(Duration::from_secs_f64(spec.timeout_s)))
                .http_status_as_error(false)
                .build();
            ureq::Agent::new_with_config(config)
        });
        Ok(Embedder {
            spec,
            agent,
            cache: RwLock::new(HashMap::new()),
        })
    }

    pub fn spec(&self) -> &EmbeddingProviderSpec {
        &self.spec
    }

    pub fn raw_dim(&self) -> usize {
        self.spec.raw_dim
    }

    pub fn provenance(&self) -> EmbeddingProvenance {
        match self.spec.kind {
            ProviderKind::Http => EmbeddingProvenance::Provider,
            ProviderKind::Fallback => EmbeddingProvenance::Fallback,
        }
    }

    pub fn cached_len(&self) -> usize {
        self.cache.read().map(|c| c.len()).unwrap_or(0)
    }

    pub fn embed(&self, text: &str, kind: EntityKind) -> Result<EmbeddingVector> {
        if text.is_empty() {
            return Err(Error::invalid("cannot embed empty text"));
        }
        let key: [u8; 32] = Sha256::digest(text.as_bytes()).into();
        if let Some(hit) = self.cache.read().ok().and_then(|c| c.get(&key).cloned()) {
            return EmbeddingVector::new(hit.as_ref().clone(), self.provenance(), kind);
        }
        let values = match self.spec.kind {
            ProviderKind::Fallback => fallback_embedding(text, self.spec.raw_dim),
            ProviderKind::Http => self.fetch(text)?,
        };
        let vector = EmbeddingVector::new(values, self.provenance(), kind)?;
        if let Ok(mut cache) = self.cache.write() {
            cache.insert(key, Arc::new(vector.values.clone()));
        }
        Ok(vector)
    }

    fn fetch(&self, text: &str) -> Result<Vec<f64>> {
        let endpoint = self.spec.endpoint.as_deref().unwrap_or_default();
        let agent = self.agent.as_ref().expect("http provider has an agent");
        let mut response = agent
            .post(endpoint)
            .send_json(EmbeddingRequest {
                model: &self.spec.model_name,
                input: [text],
            })
            .map_err(|e| Error::Provider {
                status: None,
                message: e.to_string(),
            })?;
        let status = response.status().as_u16();
        if !(200..300).contains(&status) {
            return Err(Error::Provider {
                status: Some(status),
                message: format!("embedding endpoint returned {status}"),
            });
        }
        let body: EmbeddingResponse = response.body_mut().read_json().map_err(|e| Error::Provider {
            status: Some(status),
            message: format!("bad response body: {e}"),
        })?;
        let values = body.data.into_iter().next().map(|d| d.embedding).ok_or(Error::Provider {
            status: Some(status),
            message: "response has no embeddings".into(),
        })?;
        if values.len() != self.spec.raw_dim {
            return Err(Error::Dimension {
                expected: self.spec.raw_dim,
                found: values.len(),
            });
        }
        Ok(values)
    }
}
