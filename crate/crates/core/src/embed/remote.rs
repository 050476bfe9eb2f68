use serde::{Deserialize, Serialize};

use super::{EmbedKind, Embedder, EmbeddingRequest};
use crate::error::{Error, Result};
use crate::http::JsonClient;
use crate::vector::SemanticVector;

/// Texts per `/embed` call.
const MAX_BATCH: usize = 256;

#[derive(Serialize)]
struct EmbedBody<'a> {
    kind: EmbedKind,
    texts: Vec<&'a str>,
}

#[derive(Deserialize)]
struct EmbedResponse {
    dim: usize,
    vectors: Vec<Vec<f32>>,
}

/// Client for `POST /embed {"kind", "texts"} -> {"dim", "vectors"}`.
pub struct RemoteEmbedder {
    client: JsonClient,
    dim: usize,
}

impl RemoteEmbedder {
    pub fn new(endpoint: String, dim: usize, timeout_ms: u64, max_in_flight: usize) -> Self {
        Self {
            client: JsonClient::new(endpoint, timeout_ms, max_in_flight),
            dim,
        }
    }

    fn call(&self, kind: EmbedKind, texts: Vec<&str>) -> Result<Vec<SemanticVector>> {
        let n = texts.len();
        let resp: EmbedResponse = self.client.post("/embed", &EmbedBody { kind, texts })?;
        if resp.dim != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: resp.dim,
            });
        }
        if resp.vectors.len() != n {
            return Err(Error::ProviderProtocol(format!(
                "asked for {n} vectors, got {}",
                resp.vectors.len()
            )));
        }
        resp.vectors
            .into_iter()
            .map(|v| SemanticVector::with_dim(v, self.dim))
            .collect()
    }
}

impl Embedder for RemoteEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn fingerprint(&self) -> String {
        format!("remote;endpoint={};dim={}", self.client.base(), self.dim)
    }

    fn embed_batch(&self, reqs: &[EmbeddingRequest]) -> Result<Vec<SemanticVector>> {
        if reqs.iter().any(|r| r.text.trim().is_empty()) {
            return Err(Error::EmptyText);
        }
        let mut out = Vec::with_capacity(reqs.len());
        // The wire protocol carries one kind per call: send maximal same-kind runs.
        let mut start = 0;
        while start < reqs.len() {
            let kind = reqs[start].kind;
            let mut end = start;
            while end < reqs.len() && reqs[end].kind == kind && end - start < MAX_BATCH {
                end += 1;
            }
            let texts = reqs[start..end].iter().map(|r| r.text.as_str()).collect();
            out.extend(self.call(kind, texts)?);
            start = end;
        }
        Ok(out)
    }
}
