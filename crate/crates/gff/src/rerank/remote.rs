//! HTTP client for a remote cross-encoder scoring endpoint.
//!
//! Wire format: POST JSON `{"inputs": ["...", ...]}` to the configured URL,
//! expecting `{"scores": [1.0, ...]}` aligned with the inputs. Large input
//! lists are split into batches transparently; concurrent callers share a
//! configurable in-flight request cap. The bearer token, if any, comes from
//! the `GFF_RERANKER_TOKEN` environment variable.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::Deserialize;

use crate::error::{GffError, Result};
use crate::rerank::Reranker;

pub const RERANKER_TOKEN_ENV: &str = "GFF_RERANKER_TOKEN";

/// Counting semaphore bounding concurrent HTTP requests.
struct RequestGate {
    available: Mutex<usize>,
    freed: Condvar,
}

impl RequestGate {
    fn new(capacity: usize) -> Self {
        RequestGate { available: Mutex::new(capacity.max(1)), freed: Condvar::new() }
    }

    fn acquire(&self) -> GatePermit<'_> {
        let mut available = self.available.lock().unwrap();
        while *available == 0 {
            available = self.freed.wait(available).unwrap();
        }
        *available -= 1;
        GatePermit { gate: self }
    }
}

struct GatePermit<'a> {
    gate: &'a RequestGate,
}

impl Drop for GatePermit<'_> {
    fn drop(&mut self) {
        *self.gate.available.lock().unwrap() += 1;
        self.gate.freed.notify_one();
    }
}

pub struct RemoteReranker {
    url: String,
    batch_size: usize,
    timeout: Duration,
    transport_retries: u32,
    auth_token: Option<String>,
    gate: RequestGate,
}

#[derive(Deserialize)]
struct ScoreResponse {
    scores: Vec<f64>,
}

impl RemoteReranker {
    pub fn new(url: impl Into<String>) -> Self {
        RemoteReranker {
            url: url.into(),
            batch_size: 512,
            timeout: Duration::from_secs(60),
            transport_retries: 2,
            auth_token: std::env::var(RERANKER_TOKEN_ENV).ok(),
            gate: RequestGate::new(4),
        }
    }

    /// Maximum inputs per HTTP request.
    pub fn with_batch_size(mut self, batch_size: usize) -> Self {
        self.batch_size = batch_size.max(1);
        self
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn with_transport_retries(mut self, retries: u32) -> Self {
        self.transport_retries = retries;
        self
    }

    /// Cap on concurrent in-flight requests across all threads sharing this
    /// client.
    pub fn with_max_in_flight(mut self, max_in_flight: usize) -> Self {
        self.gate = RequestGate::new(max_in_flight);
        self
    }

    fn post_chunk(&self, chunk: &[String]) -> Result<Vec<f64>> {
        let _permit = self.gate.acquire();
        let mut last = String::new();
        for attempt in 0..=self.transport_retries {
            let mut request = ureq::post(&self.url).timeout(self.timeout);
            if let Some(token) = &self.auth_token {
                request = request.set("Authorization", &format!("Bearer {token}"));
            }
            let (retryable, msg) = match request.send_json(serde_json::json!({ "inputs": chunk }))
            {
                Ok(resp) => match resp.into_json::<ScoreResponse>() {
                    Ok(body) => {
                        if body.scores.len() != chunk.len() {
                            return Err(GffError::ScoreCountMismatch {
                                expected: chunk.len(),
                                got: body.scores.len(),
                            });
                        }
                        return Ok(body.scores);
                    }
                    Err(e) => (false, format!("malformed reranker response: {e}")),
                },
                Err(ureq::Error::Status(code, _)) => {
                    (code >= 500, format!("reranker endpoint returned HTTP {code}"))
                }
                Err(ureq::Error::Transport(t)) => {
                    (true, format!("reranker transport error: {t}"))
                }
            };
            if !retryable {
                return Err(GffError::Reranker(msg));
            }
            last = msg;
            if attempt < self.transport_retries {
                std::thread::sleep(Duration::from_millis(50 * (attempt as u64 + 1)));
            }
        }
        Err(GffError::Reranker(last))
    }
}

impl Reranker for RemoteReranker {
    fn score(&self, concatenated_input: &str) -> Result<f64> {
        let scores = self.score_batch(std::slice::from_ref(&concatenated_input.to_string()))?;
        Ok(scores[0])
    }

    fn score_batch(&self, inputs: &[String]) -> Result<Vec<f64>> {
        let mut scores = Vec::with_capacity(inputs.len());
        for chunk in inputs.chunks(self.batch_size) {
            scores.extend(self.post_chunk(chunk)?);
        }
        Ok(scores)
    }
}
