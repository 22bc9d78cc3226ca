//! Client for an OpenIE annotation server speaking the CoreNLP JSON dialect.

use std::time::Duration;

use serde::Deserialize;

use super::{BackendError, Extraction, ExtractorBackend};
use crate::http::{HttpClient, HttpError, RetryPolicy};

/// Annotator properties sent with every request.
pub const OPENIE_PROPERTIES: &str = r#"{"annotators":"tokenize,ssplit,pos,lemma,depparse,natlog,openie","outputFormat":"json","ssplit.isOneSentence":"true"}"#;

/// `POST {base_url}/?properties=...` with the raw sentence as the body.
pub struct RemoteOpenIe {
    pub base_url: String,
    pub retry: RetryPolicy,
    client: HttpClient,
}

impl RemoteOpenIe {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            retry: RetryPolicy::default(),
            client: HttpClient::new(Duration::from_secs(120)),
        }
    }
}

#[derive(Debug, Deserialize)]
struct Response {
    #[serde(default)]
    sentences: Vec<SentenceAnnotation>,
}

#[derive(Debug, Deserialize)]
struct SentenceAnnotation {
    #[serde(default)]
    openie: Vec<RawTriple>,
}

#[derive(Debug, Deserialize)]
struct RawTriple {
    subject: String,
    relation: String,
    object: String,
    confidence: Option<f64>,
}

/// Parses a server response. Triples with a blank phrase are dropped;
/// a missing confidence is read as 1.0; one outside `[0, 1]` is a protocol error.
pub fn parse_openie_response(body: &str) -> Result<Vec<Extraction>, BackendError> {
    let resp: Response =
        serde_json::from_str(body).map_err(|e| BackendError::Sentence(format!("bad OpenIE response: {e}")))?;
    let mut out = Vec::new();
    for raw in resp.sentences.into_iter().flat_map(|s| s.openie) {
        let confidence = raw.confidence.unwrap_or(1.0);
        if !(0.0..=1.0).contains(&confidence) {
            return Err(BackendError::Sentence(format!(
                "confidence {confidence} outside [0, 1]"
            )));
        }
        let (subject, relation, object) = (raw.subject.trim(), raw.relation.trim(), raw.object.trim());
        if subject.is_empty() || relation.is_empty() || object.is_empty() {
            continue;
        }
        out.push(Extraction {
            subject: subject.to_string(),
            relation: relation.to_string(),
            object: object.to_string(),
            confidence,
        });
    }
    Ok(out)
}

impl ExtractorBackend for RemoteOpenIe {
    fn name(&self) -> String {
        format!("remote:{}", self.base_url)
    }

    fn extract(&self, sentence: &str) -> Result<Vec<Extraction>, BackendError> {
        let url = format!("{}/", self.base_url.trim_end_matches('/'));
        let body = self
            .retry
            .run(|| {
                self.client
                    .post_text(&url, &[("properties", OPENIE_PROPERTIES)], sentence)
            })
            .map_err(|e| match e {
                HttpError::Transport { .. } => BackendError::Unavailable(e.to_string()),
                HttpError::Status { .. } => BackendError::Sentence(e.to_string()),
            })?;
        parse_openie_response(&body)
    }
}
