//! Blocking HTTP plumbing shared by the service clients.

use std::thread;
use std::time::Duration;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HttpError {
    #[error("transport error talking to {url}: {message}")]
    Transport { url: String, message: String },
    #[error("{url} returned HTTP {status}: {body}")]
    Status { url: String, status: u16, body: String },
}

impl HttpError {
    /// Transport failures, 429 and 5xx are worth another attempt.
    pub fn is_retryable(&self) -> bool {
        match self {
            HttpError::Transport { .. } => true,
            HttpError::Status { status, .. } => *status == 429 || *status >= 500,
        }
    }

    pub fn status(&self) -> Option<u16> {
        match self {
            HttpError::Status { status, .. } => Some(*status),
            HttpError::Transport { .. } => None,
        }
    }
}

/// Bounded retries with exponential backoff: the wait before attempt `n + 1`
/// is `initial_backoff * 2^(n - 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub initial_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            attempts: 3,
            initial_backoff: Duration::from_secs(1),
        }
    }
}

impl RetryPolicy {
    pub fn backoff_before(&self, attempt: u32) -> Duration {
        self.initial_backoff * 2u32.saturating_pow(attempt.saturating_sub(2))
    }

    /// Runs `op` until it succeeds, fails with a non-retryable error, or the
    /// attempts are used up. Returns the last error on failure.
    pub fn run<T>(&self, mut op: impl FnMut() -> Result<T, HttpError>) -> Result<T, HttpError> {
        let attempts = self.attempts.max(1);
        let mut attempt = 1;
        loop {
            match op() {
                Ok(v) => return Ok(v),
                Err(e) if attempt < attempts && e.is_retryable() => {
                    attempt += 1;
                    let wait = self.backoff_before(attempt);
                    log::warn!("{e}; retrying in {wait:?} (attempt {attempt}/{attempts})");
                    thread::sleep(wait);
                }
                Err(e) => return Err(e),
            }
        }
    }
}

/// Thin wrapper over a `ureq` agent that reports non-2xx as [`HttpError::Status`].
#[derive(Clone)]
pub struct HttpClient {
    agent: ureq::Agent,
}

const BODY_LIMIT: u64 = 512 * 1024 * 1024;

impl HttpClient {
    pub fn new(timeout: Duration) -> Self {
        let config = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(timeout))
            .build();
        Self {
            agent: ureq::Agent::new_with_config(config),
        }
    }

    pub fn get(&self, url: &str, query: &[(&str, &str)]) -> Result<String, HttpError> {
        let mut req = self.agent.get(url);
        for (k, v) in query {
            req = req.query(*k, *v);
        }
        finish(url, req.call())
    }

    pub fn post_json(&self, url: &str, query: &[(&str, &str)], body: &str) -> Result<String, HttpError> {
        let mut req = self.agent.post(url).content_type("application/json");
        for (k, v) in query {
            req = req.query(*k, *v);
        }
        finish(url, req.send(body))
    }

    pub fn post_text(&self, url: &str, query: &[(&str, &str)], body: &str) -> Result<String, HttpError> {
        let mut req = self.agent.post(url).content_type("text/plain; charset=utf-8");
        for (k, v) in query {
            req = req.query(*k, *v);
        }
        finish(url, req.send(body))
    }
}

impl Default for HttpClient {
    fn default() -> Self {
        Self::new(Duration::from_secs(60))
    }
}

fn finish(url: &str, result: Result<ureq::http::Response<ureq::Body>, ureq::Error>) -> Result<String, HttpError> {
    let transport = |e: ureq::Error| HttpError::Transport {
        url: url.to_string(),
        message: e.to_string(),
    };
    let mut resp = result.map_err(transport)?;
    let status = resp.status().as_u16();
    let body = resp
        .body_mut()
        .with_config()
        .limit(BODY_LIMIT)
        .read_to_string()
        .map_err(transport)?;
    if (200..300).contains(&status) {
        Ok(body)
    } else {
        Err(HttpError::Status {
            url: url.to_string(),
            status,
            body: body.chars().take(200).collect(),
        })
    }
}

/// Joins a base URL and a path without doubling slashes.
pub fn join_url(base: &str, path: &str) -> String {
    format!("{}/{}", base.trim_end_matches('/'), path.trim_start_matches('/'))
}
