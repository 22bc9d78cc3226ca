//! Sentence-level (subject, relation, object) extraction.

mod naive;
mod remote;
mod sentences;

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Document;
use crate::text::word_tokens;

pub use naive::{is_verb_like, naive_extract};
pub use remote::{OPENIE_PROPERTIES, RemoteOpenIe, parse_openie_response};
pub use sentences::split_sentences;

#[derive(Debug, Error)]
pub enum BackendError {
    /// This sentence failed; the rest of the document can continue.
    #[error("sentence failed: {0}")]
    Sentence(String),
    /// The backend cannot be reached at all.
    #[error("backend unavailable: {0}")]
    Unavailable(String),
}

#[derive(Debug, Error)]
pub enum ExtractionError {
    #[error("extraction failed for document {doc_id}: {source}")]
    Document {
        doc_id: String,
        #[source]
        source: BackendError,
    },
    #[error("invalid triplet: {0}")]
    InvalidTriplet(String),
    #[error("triplet file {path}: {message}")]
    File { path: String, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// What a backend returns for one sentence, before provenance is attached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extraction {
    pub subject: String,
    pub relation: String,
    pub object: String,
    pub confidence: f64,
}

/// One knowledge-base record with its provenance. Field order matches the
/// intermediate JSON-lines file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Triplet {
    pub doc_id: String,
    pub sentence_index: usize,
    pub subject: String,
    pub relation: String,
    pub object: String,
    pub confidence: f64,
}

impl Triplet {
    pub fn new(
        doc_id: impl Into<String>,
        sentence_index: usize,
        subject: &str,
        relation: &str,
        object: &str,
        confidence: f64,
    ) -> Result<Self, ExtractionError> {
        let t = Self {
            doc_id: doc_id.into(),
            sentence_index,
            subject: subject.trim().to_string(),
            relation: relation.trim().to_string(),
            object: object.trim().to_string(),
            confidence,
        };
        t.validate()?;
        Ok(t)
    }

    /// A bare (subject, relation, object) record without provenance.
    pub fn bare(subject: &str, relation: &str, object: &str) -> Self {
        Self {
            doc_id: String::new(),
            sentence_index: 0,
            subject: subject.to_string(),
            relation: relation.to_string(),
            object: object.to_string(),
            confidence: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), ExtractionError> {
        for (name, v) in [
            ("subject", &self.subject),
            ("relation", &self.relation),
            ("object", &self.object),
        ] {
            if v.trim().is_empty() {
                return Err(ExtractionError::InvalidTriplet(format!("empty {name}")));
            }
        }
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(ExtractionError::InvalidTriplet(format!(
                "confidence {} outside [0, 1]",
                self.confidence
            )));
        }
        Ok(())
    }

    /// The exact-string key used for deduplication.
    pub fn key(&self) -> (&str, &str, &str) {
        (&self.subject, &self.relation, &self.object)
    }

    /// Whether every phrase's tokens occur, in order, within `sentence`.
    pub fn is_grounded_in(&self, sentence: &str) -> bool {
        let sent = word_tokens(sentence);
        [&self.subject, &self.relation, &self.object]
            .iter()
            .all(|p| is_subsequence(&word_tokens(p), &sent))
    }
}

fn is_subsequence(needle: &[String], haystack: &[String]) -> bool {
    let mut it = haystack.iter();
    needle.iter().all(|n| it.any(|h| h == n))
}

/// Something that turns one sentence into extractions.
pub trait ExtractorBackend: Sync {
    fn name(&self) -> String;
    fn extract(&self, sentence: &str) -> Result<Vec<Extraction>, BackendError>;
}

/// The built-in rule extractor.
#[derive(Debug, Default, Clone, Copy)]
pub struct NaiveBackend;

impl ExtractorBackend for NaiveBackend {
    fn name(&self) -> String {
        "naive".to_string()
    }

    fn extract(&self, sentence: &str) -> Result<Vec<Extraction>, BackendError> {
        Ok(naive_extract(sentence))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DocumentExtraction {
    pub triplets: Vec<Triplet>,
    pub sentences: usize,
    pub skipped_sentences: usize,
}

/// Splits the body into sentences and runs `backend` on each, in order.
/// Per-sentence failures are skipped and counted; an unreachable backend
/// fails the document.
pub fn extract_triplets(doc: &Document, backend: &dyn ExtractorBackend) -> Result<DocumentExtraction, ExtractionError> {
    let sentences = split_sentences(&doc.body);
    let mut triplets = Vec::new();
    let mut skipped = 0;
    for (index, sentence) in sentences.iter().enumerate() {
        match backend.extract(sentence) {
            Ok(found) => {
                for e in found {
                    match Triplet::new(&doc.id, index, &e.subject, &e.relation, &e.object, e.confidence) {
                        Ok(t) => triplets.push(t),
                        Err(err) => log::warn!("{} sentence {index}: dropping {err}", doc.id),
                    }
                }
            }
            Err(BackendError::Sentence(msg)) => {
                log::warn!("{} sentence {index}: {msg}", doc.id);
                skipped += 1;
            }
            Err(source @ BackendError::Unavailable(_)) => {
                return Err(ExtractionError::Document {
                    doc_id: doc.id.clone(),
                    source,
                });
            }
        }
    }
    Ok(DocumentExtraction {
        triplets,
        sentences: sentences.len(),
        skipped_sentences: skipped,
    })
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CorpusExtraction {
    pub triplets: Vec<Triplet>,
    pub documents: usize,
    pub sentences: usize,
    pub skipped_sentences: usize,
    pub below_confidence: usize,
}

/// Extracts from every document on a pool of `workers` threads (0 = one per
/// CPU). Output is ordered by document id, then sentence, then backend order.
pub fn extract_corpus(
    docs: &[Document],
    backend: &dyn ExtractorBackend,
    workers: usize,
    min_confidence: Option<f64>,
) -> Result<CorpusExtraction, ExtractionError> {
    let mut ordered: Vec<&Document> = docs.iter().collect();
    ordered.sort_by(|a, b| a.id.cmp(&b.id));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| io::Error::other(e.to_string()))?;
    let per_doc: Vec<DocumentExtraction> = pool.install(|| {
        ordered
            .par_iter()
            .map(|d| extract_triplets(d, backend))
            .collect::<Result<_, _>>()
    })?;
    let mut out = CorpusExtraction {
        documents: docs.len(),
        ..Default::default()
    };
    for d in per_doc {
        out.sentences += d.sentences;
        out.skipped_sentences += d.skipped_sentences;
        for t in d.triplets {
            if min_confidence.is_some_and(|m| t.confidence < m) {
                out.below_confidence += 1;
            } else {
                out.triplets.push(t);
            }
        }
    }
    Ok(out)
}

pub fn write_triplets_jsonl<W: Write>(triplets: &[Triplet], out: W) -> io::Result<()> {
    let mut out = BufWriter::new(out);
    for t in triplets {
        serde_json::to_writer(&mut out, t)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn save_triplets(triplets: &[Triplet], path: &Path) -> io::Result<()> {
    write_triplets_jsonl(triplets, File::create(path)?)
}

pub fn load_triplets(path: &Path) -> Result<Vec<Triplet>, ExtractionError> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let t: Triplet = serde_json::from_str(&line).map_err(|e| ExtractionError::File {
            path: path.display().to_string(),
            message: format!("line {}: {e}", n + 1),
        })?;
        t.validate()?;
        out.push(t);
    }
    Ok(out)
}
