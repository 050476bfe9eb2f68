//! Embedding providers: a deterministic mock, an HTTP client for the
//! embedding sidecar, and an on-disk cache that wraps either.

mod cache;
mod mock;
mod remote;

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vector::{SemanticVector, DEFAULT_DIM};

pub use cache::CachedEmbedder;
pub use mock::MockEmbedder;
pub use remote::RemoteEmbedder;

/// Environment variable the CLI reads for the embedding endpoint.
pub const ENDPOINT_ENV: &str = "MPVE_EMBED_ENDPOINT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbedKind {
    Sentence,
    Word,
}

impl EmbedKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EmbedKind::Sentence => "sentence",
            EmbedKind::Word => "word",
        }
    }

    pub(crate) fn code(self) -> u16 {
        match self {
            EmbedKind::Sentence => 0,
            EmbedKind::Word => 1,
        }
    }

    pub(crate) fn from_code(code: u16) -> Option<Self> {
        match code {
            0 => Some(EmbedKind::Sentence),
            1 => Some(EmbedKind::Word),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EmbeddingRequest {
    pub kind: EmbedKind,
    pub text: String,
}

impl EmbeddingRequest {
    pub fn new(kind: EmbedKind, text: impl Into<String>) -> Result<Self> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(Error::EmptyText);
        }
        Ok(Self { kind, text })
    }

    pub fn sentence(text: impl Into<String>) -> Result<Self> {
        Self::new(EmbedKind::Sentence, text)
    }

    pub fn word(text: impl Into<String>) -> Result<Self> {
        Self::new(EmbedKind::Word, text)
    }
}

/// A source of sentence- and word-level vectors.
///
/// Implementations must be deterministic: identical `(kind, text)` always
/// yields an identical vector for the lifetime of the provider.
pub trait Embedder: Send + Sync {
    fn dim(&self) -> usize;

    /// Identifies the provider configuration; stored in built indexes.
    fn fingerprint(&self) -> String;

    /// Element-wise `embed`; order preserved, first error aborts the batch.
    fn embed_batch(&self, reqs: &[EmbeddingRequest]) -> Result<Vec<SemanticVector>>;

    fn embed(&self, req: &EmbeddingRequest) -> Result<SemanticVector> {
        let mut out = self.embed_batch(std::slice::from_ref(req))?;
        out.pop()
            .ok_or_else(|| Error::ProviderProtocol("empty response for single request".into()))
    }
}

impl<E: Embedder + ?Sized> Embedder for Arc<E> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn fingerprint(&self) -> String {
        (**self).fingerprint()
    }
    fn embed_batch(&self, reqs: &[EmbeddingRequest]) -> Result<Vec<SemanticVector>> {
        (**self).embed_batch(reqs)
    }
    fn embed(&self, req: &EmbeddingRequest) -> Result<SemanticVector> {
        (**self).embed(req)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaseMode {
    Remote,
    Mock,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderMode {
    Remote,
    Mock,
    Cached(BaseMode),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProviderConfig {
    pub mode: ProviderMode,
    pub endpoint: Option<String>,
    pub dim: usize,
    pub cache_path: Option<PathBuf>,
    pub timeout_ms: u64,
    /// Upper bound on concurrent HTTP requests (remote only).
    pub max_in_flight: usize,
    /// JSON fixture table for the mock (see [`MockEmbedder::load_fixtures`]).
    pub fixtures_path: Option<PathBuf>,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            mode: ProviderMode::Mock,
            endpoint: None,
            dim: DEFAULT_DIM,
            cache_path: None,
            timeout_ms: 30_000,
            max_in_flight: 4,
            fixtures_path: None,
        }
    }
}

impl ProviderConfig {
    pub fn mock(dim: usize) -> Self {
        Self {
            dim,
            ..Self::default()
        }
    }

    pub fn remote(endpoint: impl Into<String>, dim: usize) -> Self {
        Self {
            mode: ProviderMode::Remote,
            endpoint: Some(endpoint.into()),
            dim,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidConfig("dim must be positive".into()));
        }
        if self.timeout_ms == 0 {
            return Err(Error::InvalidConfig("timeout_ms must be positive".into()));
        }
        if self.max_in_flight == 0 {
            return Err(Error::InvalidConfig("max_in_flight must be positive".into()));
        }
        if matches!(self.mode, ProviderMode::Cached(_)) && self.cache_path.is_none() {
            return Err(Error::InvalidConfig("cached mode needs cache_path".into()));
        }
        Ok(())
    }

    /// Builds the provider this configuration describes.
    pub fn build(&self) -> Result<Arc<dyn Embedder>> {
        self.validate()?;
        let base = match self.mode {
            ProviderMode::Mock | ProviderMode::Cached(BaseMode::Mock) => BaseMode::Mock,
            ProviderMode::Remote | ProviderMode::Cached(BaseMode::Remote) => BaseMode::Remote,
        };
        let inner: Arc<dyn Embedder> = match base {
            BaseMode::Mock => {
                let mut mock = MockEmbedder::new(self.dim);
                if let Some(path) = &self.fixtures_path {
                    mock.load_fixtures(path)?;
                }
                Arc::new(mock)
            }
            BaseMode::Remote => {
                let endpoint = self.endpoint.clone().filter(|e| !e.trim().is_empty()).ok_or_else(|| {
                    Error::InvalidConfig("remote mode needs an endpoint".into())
                })?;
                Arc::new(RemoteEmbedder::new(
                    endpoint,
                    self.dim,
                    self.timeout_ms,
                    self.max_in_flight,
                ))
            }
        };
        match (self.mode, &self.cache_path) {
            (ProviderMode::Cached(_), Some(path)) => {
                Ok(Arc::new(CachedEmbedder::open(path, inner)?))
            }
            _ => Ok(inner),
        }
    }

    /// Best-effort reconstruction from an index fingerprint.
    pub fn from_fingerprint(fingerprint: &str) -> Option<Self> {
        let mut parts = fingerprint.split(';');
        let mode = parts.next()?;
        let mut cfg = Self::default();
        for kv in parts {
            let (k, v) = kv.split_once('=')?;
            match k {
                "dim" => cfg.dim = v.parse().ok()?,
                "endpoint" => cfg.endpoint = Some(v.to_string()),
                _ => {}
            }
        }
        cfg.mode = match mode {
            "mock" => ProviderMode::Mock,
            "remote" => ProviderMode::Remote,
            _ => return None,
        };
        Some(cfg)
    }
}
