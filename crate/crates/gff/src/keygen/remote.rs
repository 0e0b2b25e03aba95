//! HTTP client for a remote text-generation endpoint.
//!
//! Wire format: POST JSON `{"prompt", "max_tokens", "temperature", "seed"}`
//! to the configured URL, expecting `{"text": "..."}` back. The endpoint
//! URL comes from configuration; the bearer token, if any, from the
//! `GFF_GENERATOR_TOKEN` environment variable. Remote generators carry no
//! determinism guarantee; the seed is forwarded for endpoints that honor it.

use std::time::Duration;

use serde::Deserialize;

use crate::error::{GffError, Result};
use crate::keygen::GeneratorEndpoint;

pub const GENERATOR_TOKEN_ENV: &str = "GFF_GENERATOR_TOKEN";

#[derive(Debug, Clone)]
pub struct RemoteGenerator {
    url: String,
    max_tokens: u32,
    temperature: f64,
    timeout: Duration,
    /// Extra attempts after transport errors or 5xx responses.
    transport_retries: u32,
    auth_token: Option<String>,
}

#[derive(Deserialize)]
struct GenerateResponse {
    text: String,
}

impl RemoteGenerator {
    /// Client for `url`, reading the auth token from the environment.
    pub fn new(url: impl Into<String>) -> Self {
        RemoteGenerator {
            url: url.into(),
            max_tokens: 256,
            temperature: 0.7,
            timeout: Duration::from_secs(60),
            transport_retries: 2,
            auth_token: std::env::var(GENERATOR_TOKEN_ENV).ok(),
        }
    }

    pub fn with_max_tokens(mut self, max_tokens: u32) -> Self {
        self.max_tokens = max_tokens;
        self
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
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

    fn call_once(&self, prompt: &str, seed: u64) -> std::result::Result<String, (bool, String)> {
        let mut request = ureq::post(&self.url).timeout(self.timeout);
        if let Some(token) = &self.auth_token {
            request = request.set("Authorization", &format!("Bearer {token}"));
        }
        let response = request.send_json(serde_json::json!({
            "prompt": prompt,
            "max_tokens": self.max_tokens,
            "temperature": self.temperature,
            "seed": seed,
        }));
        match response {
            Ok(resp) => resp
                .into_json::<GenerateResponse>()
                .map(|r| r.text)
                .map_err(|e| (false, format!("malformed generator response: {e}"))),
            // 5xx and transport failures are worth retrying; 4xx is not.
            Err(ureq::Error::Status(code, _)) => {
                Err((code >= 500, format!("generator endpoint returned HTTP {code}")))
            }
            Err(ureq::Error::Transport(t)) => Err((true, format!("generator transport error: {t}"))),
        }
    }
}

impl GeneratorEndpoint for RemoteGenerator {
    fn generate(&self, prompt: &str, sample_seed: u64) -> Result<String> {
        let mut last = String::new();
        for attempt in 0..=self.transport_retries {
            match self.call_once(prompt, sample_seed) {
                Ok(text) => return Ok(text),
                Err((retryable, msg)) => {
                    if !retryable {
                        return Err(GffError::Generator(msg));
                    }
                    last = msg;
                    if attempt < self.transport_retries {
                        std::thread::sleep(Duration::from_millis(50 * (attempt as u64 + 1)));
                    }
                }
            }
        }
        Err(GffError::Generator(last))
    }
}
