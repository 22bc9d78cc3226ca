use std::collections::{HashMap, HashSet};
use std::sync::Mutex;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{MetricsError, TokenEmbeddings};
use crate::http::{HttpClient, HttpError, RetryPolicy, join_url};
use crate::rng::SplitMix64;
use crate::text::{fnv1a64, word_tokens};

/// Supplies token embeddings for texts; one result per text, same order.
pub trait EmbeddingProvider: Sync {
    fn name(&self) -> String;
    fn embed(&self, texts: &[String]) -> Result<Vec<TokenEmbeddings>, MetricsError>;
}

/// Deterministic offline embedder. Tokens come from the ROUGE tokenizer; each
/// distinct token maps to a fixed unit vector whose components are
/// `2u - 1` for successive `u = next_f64()` of SplitMix64(fnv1a64(token)).
/// Independent random directions in `dim` dimensions are nearly orthogonal.
#[derive(Debug, Clone, Copy)]
pub struct ToyEmbedder {
    pub dim: usize,
}

impl Default for ToyEmbedder {
    fn default() -> Self {
        Self { dim: 64 }
    }
}

impl ToyEmbedder {
    pub fn token_vector(&self, token: &str) -> Vec<f64> {
        let mut rng = SplitMix64::new(fnv1a64(token));
        let v: Vec<f64> = (0..self.dim).map(|_| 2.0 * rng.next_f64() - 1.0).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.into_iter().map(|x| x / norm).collect()
    }

    pub fn embed_text(&self, text: &str) -> TokenEmbeddings {
        let tokens = word_tokens(text);
        let vectors = tokens.iter().map(|t| self.token_vector(t)).collect();
        TokenEmbeddings::new(tokens, vectors).expect("toy vectors are well formed")
    }
}

impl EmbeddingProvider for ToyEmbedder {
    fn name(&self) -> String {
        format!("toy-hash-{}", self.dim)
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<TokenEmbeddings>, MetricsError> {
        Ok(texts.iter().map(|t| self.embed_text(t)).collect())
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [String],
}

#[derive(Deserialize)]
struct EmbedResponse {
    results: Vec<EmbedResult>,
}

#[derive(Deserialize)]
struct EmbedResult {
    tokens: Vec<String>,
    vectors: Vec<Vec<f64>>,
}

/// Parses an `/embed` response and checks it against the request size.
pub fn parse_embed_response(body: &str, requested: usize) -> Result<Vec<TokenEmbeddings>, MetricsError> {
    let resp: EmbedResponse =
        serde_json::from_str(body).map_err(|e| MetricsError::Protocol(format!("bad /embed response: {e}")))?;
    if resp.results.len() != requested {
        return Err(MetricsError::Protocol(format!(
            "asked for {requested} embeddings, got {}",
            resp.results.len()
        )));
    }
    resp.results
        .into_iter()
        .map(|r| TokenEmbeddings::new(r.tokens, r.vectors))
        .collect()
}

/// Client for `POST {base_url}/embed`.
pub struct HttpEmbedder {
    pub base_url: String,
    pub retry: RetryPolicy,
    client: HttpClient,
}

impl HttpEmbedder {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            retry: RetryPolicy::default(),
            client: HttpClient::new(Duration::from_secs(120)),
        }
    }
}

impl EmbeddingProvider for HttpEmbedder {
    fn name(&self) -> String {
        format!("http:{}", self.base_url)
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<TokenEmbeddings>, MetricsError> {
        let url = join_url(&self.base_url, "embed");
        let body = serde_json::to_string(&EmbedRequest { texts }).expect("request serializes");
        let text = self
            .retry
            .run(|| self.client.post_json(&url, &[], &body))
            .map_err(|e| match e {
                HttpError::Status { status, .. } if status < 500 && status != 429 => {
                    MetricsError::Protocol(e.to_string())
                }
                _ => MetricsError::EmbedderUnavailable(e.to_string()),
            })?;
        parse_embed_response(&text, texts.len())
    }
}

/// Memoizes another provider so each distinct text is requested once.
pub struct CachedEmbedder<'a> {
    inner: &'a dyn EmbeddingProvider,
    batch_size: usize,
    cache: Mutex<HashMap<String, TokenEmbeddings>>,
    sent: AtomicUsize,
}

impl<'a> CachedEmbedder<'a> {
    pub fn new(inner: &'a dyn EmbeddingProvider) -> Self {
        Self::with_batch_size(inner, 64)
    }

    pub fn with_batch_size(inner: &'a dyn EmbeddingProvider, batch_size: usize) -> Self {
        Self {
            inner,
            batch_size: batch_size.max(1),
            cache: Mutex::new(HashMap::new()),
            sent: AtomicUsize::new(0),
        }
    }

    /// Number of texts forwarded to the wrapped provider so far.
    pub fn texts_requested(&self) -> usize {
        self.sent.load(Ordering::SeqCst)
    }
}

impl EmbeddingProvider for CachedEmbedder<'_> {
    fn name(&self) -> String {
        self.inner.name()
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<TokenEmbeddings>, MetricsError> {
        let missing: Vec<String> = {
            let cache = self.cache.lock().unwrap();
            let mut seen = HashSet::new();
            texts
                .iter()
                .filter(|t| !cache.contains_key(*t) && seen.insert(t.as_str()))
                .cloned()
                .collect()
        };
        for batch in missing.chunks(self.batch_size) {
            let got = self.inner.embed(batch)?;
            if got.len() != batch.len() {
                return Err(MetricsError::Protocol(format!(
                    "asked for {} embeddings, got {}",
                    batch.len(),
                    got.len()
                )));
            }
            self.sent.fetch_add(batch.len(), Ordering::SeqCst);
            self.cache.lock().unwrap().extend(batch.iter().cloned().zip(got));
        }
        let cache = self.cache.lock().unwrap();
        Ok(texts.iter().map(|t| cache[t].clone()).collect())
    }
}
