//! Client for the NLP sidecar's `/parse` and `/detect` endpoints.
//! (`/embed` is spoken by [`crate::embed::RemoteEmbedder`].)

use serde::{Deserialize, Serialize};

use crate::conllu::{parse_conllu_str, ParsedSentence};
use crate::error::{Error, Result};
use crate::http::JsonClient;
use crate::keyframe::Detection;

/// Environment variable the CLI reads for the sidecar endpoint.
pub const SIDECAR_ENV: &str = "MPVE_SIDECAR_ENDPOINT";

#[derive(Serialize)]
struct ParseBody<'a> {
    texts: &'a [&'a str],
}

#[derive(Deserialize)]
struct ParseResponse {
    conllu: Vec<String>,
}

#[derive(Serialize)]
struct DetectBody<'a> {
    video_ref: &'a str,
    captions: &'a [String],
    stride: usize,
}

pub struct SidecarClient {
    client: JsonClient,
}

impl SidecarClient {
    pub fn new(endpoint: impl Into<String>, timeout_ms: u64) -> Self {
        Self {
            client: JsonClient::new(endpoint, timeout_ms, 4),
        }
    }

    pub fn endpoint(&self) -> &str {
        self.client.base()
    }

    /// One list of sentences per input text, order preserved.
    pub fn parse(&self, texts: &[&str]) -> Result<Vec<Vec<ParsedSentence>>> {
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        if texts.iter().any(|t| t.trim().is_empty()) {
            return Err(Error::EmptyText);
        }
        let resp: ParseResponse = self.client.post("/parse", &ParseBody { texts })?;
        if resp.conllu.len() != texts.len() {
            return Err(Error::ProviderProtocol(format!(
                "sent {} texts to /parse, got {} blocks",
                texts.len(),
                resp.conllu.len()
            )));
        }
        resp.conllu.iter().map(|b| parse_conllu_str(b)).collect()
    }

    pub fn detect(&self, video_ref: &str, captions: &[String], stride: usize) -> Result<Vec<Detection>> {
        if captions.is_empty() {
            return Err(Error::InvalidInput("detection needs at least one caption".into()));
        }
        self.client.post(
            "/detect",
            &DetectBody {
                video_ref,
                captions,
                stride: stride.max(1),
            },
        )
    }
}
