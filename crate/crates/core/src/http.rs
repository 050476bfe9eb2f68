//! Minimal blocking JSON-over-HTTP client shared by the embedding and
//! sidecar clients.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

/// Counting gate bounding concurrent requests.
struct Gate {
    limit: usize,
    in_flight: Mutex<usize>,
    freed: Condvar,
}

struct Permit<'a>(&'a Gate);

impl Gate {
    fn acquire(&self) -> Permit<'_> {
        let mut n = self.in_flight.lock().unwrap_or_else(|e| e.into_inner());
        while *n >= self.limit {
            n = self.freed.wait(n).unwrap_or_else(|e| e.into_inner());
        }
        *n += 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut n = self.0.in_flight.lock().unwrap_or_else(|e| e.into_inner());
        *n -= 1;
        self.0.freed.notify_one();
    }
}

pub(crate) struct JsonClient {
    base: String,
    agent: ureq::Agent,
    gate: Gate,
}

impl JsonClient {
    pub fn new(base: impl Into<String>, timeout_ms: u64, max_in_flight: usize) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(timeout_ms)))
            .http_status_as_error(false)
            .build();
        Self {
            base: base.into().trim_end_matches('/').to_string(),
            agent: ureq::Agent::new_with_config(config),
            gate: Gate {
                limit: max_in_flight.max(1),
                in_flight: Mutex::new(0),
                freed: Condvar::new(),
            },
        }
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    pub fn post<B: Serialize, R: DeserializeOwned>(&self, path: &str, body: &B) -> Result<R> {
        let url = format!("{}{}", self.base, path);
        let _permit = self.gate.acquire();
        let resp = self
            .agent
            .post(&url)
            .send_json(body)
            .map_err(|e| Error::ProviderUnreachable(format!("{url}: {e}")))?;
        let status = resp.status().as_u16();
        let mut body = resp.into_body();
        if !(200..300).contains(&status) {
            let text = body.read_to_string().unwrap_or_default();
            return Err(Error::ProviderProtocol(format!(
                "{url} returned HTTP {status}: {}",
                text.trim()
            )));
        }
        body.with_config()
            .limit(256 * 1024 * 1024)
            .read_json()
            .map_err(|e| match e {
                ureq::Error::Json(e) => Error::ProviderProtocol(format!("{url}: bad JSON: {e}")),
                other => Error::ProviderUnreachable(format!("{url}: {other}")),
            })
    }
}
