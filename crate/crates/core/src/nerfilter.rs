//! Biomedical-entity gating of triplets.
//!
//! Subject and object phrases are scored by an [`EntityScorer`]; a triplet
//! survives when both probabilities are strictly above the threshold.
//! Relation phrases are never scored.

use std::collections::{HashMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extraction::Triplet;
use crate::http::{HttpClient, HttpError, RetryPolicy, join_url};
use crate::text::{fnv1a64, word_tokens};

#[derive(Debug, Error)]
pub enum NerError {
    #[error("entity scorer unavailable: {0}")]
    ScorerUnavailable(String),
    #[error("entity scorer protocol error: {0}")]
    Protocol(String),
    #[error("batch size must be at least 1")]
    ZeroBatch,
    #[error("threshold {0} outside [0, 1]")]
    BadThreshold(f64),
    #[error("phrase cache {path}: {source}")]
    Cache {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("lexicon {path}: {message}")]
    Lexicon { path: String, message: String },
}

/// Scores phrases for being biomedical entities; one probability per phrase,
/// same order.
pub trait EntityScorer: Sync {
    fn name(&self) -> String;
    fn score(&self, phrases: &[String]) -> Result<Vec<f64>, NerError>;
}

/// Checks the response contract: equal length, every value in `[0, 1]`.
pub fn check_probs(requested: usize, probs: &[f64]) -> Result<(), NerError> {
    if probs.len() != requested {
        return Err(NerError::Protocol(format!(
            "asked for {requested} probabilities, got {}",
            probs.len()
        )));
    }
    if let Some(bad) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(NerError::Protocol(format!("probability {bad} outside [0, 1]")));
    }
    Ok(())
}

#[derive(Serialize)]
struct NerRequest<'a> {
    phrases: &'a [String],
}

#[derive(Deserialize)]
struct NerResponse {
    probs: Vec<f64>,
}

/// Client for `POST {base_url}/ner_score`.
pub struct HttpEntityScorer {
    pub base_url: String,
    pub retry: RetryPolicy,
    client: HttpClient,
}

impl HttpEntityScorer {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            retry: RetryPolicy::default(),
            client: HttpClient::new(Duration::from_secs(120)),
        }
    }
}

impl EntityScorer for HttpEntityScorer {
    fn name(&self) -> String {
        format!("http:{}", self.base_url)
    }

    fn score(&self, phrases: &[String]) -> Result<Vec<f64>, NerError> {
        let url = join_url(&self.base_url, "ner_score");
        let body = serde_json::to_string(&NerRequest { phrases }).expect("request serializes");
        let text = self
            .retry
            .run(|| self.client.post_json(&url, &[], &body))
            .map_err(|e| match e {
                HttpError::Status { status, .. } if status < 500 && status != 429 => NerError::Protocol(e.to_string()),
                _ => NerError::ScorerUnavailable(e.to_string()),
            })?;
        let resp: NerResponse =
            serde_json::from_str(&text).map_err(|e| NerError::Protocol(format!("bad response: {e}")))?;
        check_probs(phrases.len(), &resp.probs)?;
        Ok(resp.probs)
    }
}

/// Deterministic stand-in scorer: `p = (fnv1a64(phrase) >> 11) / 2^53`,
/// hashing the exact UTF-8 bytes of the phrase.
#[derive(Debug, Default, Clone, Copy)]
pub struct StubScorer;

impl StubScorer {
    pub fn probability(phrase: &str) -> f64 {
        (fnv1a64(phrase) >> 11) as f64 / (1u64 << 53) as f64
    }
}

impl EntityScorer for StubScorer {
    fn name(&self) -> String {
        "stub-fnv1a".to_string()
    }

    fn score(&self, phrases: &[String]) -> Result<Vec<f64>, NerError> {
        Ok(phrases.iter().map(|p| Self::probability(p)).collect())
    }
}

/// Token lexicon scorer: a phrase scores the maximum lexicon probability over
/// its lowercased tokens, or `default` when none is listed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexiconScorer {
    pub default: f64,
    pub terms: HashMap<String, f64>,
}

impl LexiconScorer {
    /// Reads `{"default": p, "terms": {"token": p, ...}}`.
    pub fn load(path: &Path) -> Result<Self, NerError> {
        let err = |message: String| NerError::Lexicon {
            path: path.display().to_string(),
            message,
        };
        let text = fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        let mut lex: LexiconScorer = serde_json::from_str(&text).map_err(|e| err(e.to_string()))?;
        lex.terms = lex.terms.into_iter().map(|(k, v)| (k.to_lowercase(), v)).collect();
        let all = std::iter::once(&lex.default).chain(lex.terms.values());
        if let Some(bad) = all.into_iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(err(format!("probability {bad} outside [0, 1]")));
        }
        Ok(lex)
    }

    pub fn probability(&self, phrase: &str) -> f64 {
        word_tokens(phrase)
            .iter()
            .filter_map(|t| self.terms.get(t).copied())
            .fold(self.default, f64::max)
    }
}

impl EntityScorer for LexiconScorer {
    fn name(&self) -> String {
        "lexicon".to_string()
    }

    fn score(&self, phrases: &[String]) -> Result<Vec<f64>, NerError> {
        Ok(phrases.iter().map(|p| self.probability(p)).collect())
    }
}

#[derive(Serialize, Deserialize)]
struct CacheLine {
    phrase: String,
    prob: f64,
}

/// Phrase → probability, optionally persisted as JSON lines keyed by the
/// exact phrase string.
#[derive(Default)]
pub struct PhraseCache {
    path: Option<PathBuf>,
    entries: HashMap<String, f64>,
}

impl PhraseCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn open(path: &Path) -> Result<Self, NerError> {
        let cache_err = |source| NerError::Cache {
            path: path.to_path_buf(),
            source,
        };
        let mut entries = HashMap::new();
        if path.exists() {
            for line in BufReader::new(File::open(path).map_err(cache_err)?).lines() {
                let line = line.map_err(cache_err)?;
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<CacheLine>(&line) {
                    Ok(c) => {
                        entries.insert(c.phrase, c.prob);
                    }
                    Err(e) => log::warn!("{}: ignoring bad cache line: {e}", path.display()),
                }
            }
        }
        Ok(Self {
            path: Some(path.to_path_buf()),
            entries,
        })
    }

    pub fn get(&self, phrase: &str) -> Option<f64> {
        self.entries.get(phrase).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn insert_all(&mut self, scored: &[(String, f64)]) -> Result<(), NerError> {
        if let Some(path) = &self.path {
            let cache_err = |source| NerError::Cache {
                path: path.clone(),
                source,
            };
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent).map_err(cache_err)?;
            }
            let mut file = OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(cache_err)?;
            for (phrase, prob) in scored {
                let line = serde_json::to_string(&CacheLine {
                    phrase: phrase.clone(),
                    prob: *prob,
                })
                .expect("cache line serializes");
                writeln!(file, "{line}").map_err(cache_err)?;
            }
        }
        self.entries.extend(scored.iter().cloned());
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredTriplet {
    #[serde(flatten)]
    pub triplet: Triplet,
    pub subject_prob: f64,
    pub object_prob: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct ScoringOptions {
    pub batch_size: usize,
    /// Batches sent concurrently.
    pub in_flight: usize,
}

impl Default for ScoringOptions {
    fn default() -> Self {
        Self {
            batch_size: 64,
            in_flight: 2,
        }
    }
}

type BatchResult = (usize, Result<Vec<f64>, NerError>);

/// Attaches subject/object probabilities to every triplet, in input order.
///
/// Each distinct phrase not already in `cache` is sent to the scorer exactly
/// once, in batches of `batch_size`, with up to `in_flight` batches running
/// at a time. Any scorer failure fails the whole call.
pub fn score_triplets(
    triplets: &[Triplet],
    scorer: &dyn EntityScorer,
    cache: &mut PhraseCache,
    options: ScoringOptions,
) -> Result<Vec<ScoredTriplet>, NerError> {
    if options.batch_size == 0 {
        return Err(NerError::ZeroBatch);
    }
    let mut seen = HashSet::new();
    let pending: Vec<String> = triplets
        .iter()
        .flat_map(|t| [&t.subject, &t.object])
        .filter(|p| cache.get(p).is_none() && seen.insert(p.as_str()))
        .cloned()
        .collect();

    let batches: Vec<&[String]> = pending.chunks(options.batch_size).collect();
    for wave in batches.chunks(options.in_flight.max(1)) {
        let results: Mutex<Vec<BatchResult>> = Mutex::new(Vec::new());
        thread::scope(|s| {
            for (i, batch) in wave.iter().enumerate() {
                let results = &results;
                s.spawn(move || {
                    let r = scorer.score(batch).and_then(|probs| {
                        check_probs(batch.len(), &probs)?;
                        Ok(probs)
                    });
                    results.lock().unwrap().push((i, r));
                });
            }
        });
        let mut results = results.into_inner().unwrap();
        results.sort_by_key(|(i, _)| *i);
        for (i, r) in results {
            let probs = r?;
            let scored: Vec<(String, f64)> = wave[i].iter().cloned().zip(probs).collect();
            cache.insert_all(&scored)?;
        }
    }

    Ok(triplets
        .iter()
        .map(|t| ScoredTriplet {
            subject_prob: cache.get(&t.subject).expect("scored above"),
            object_prob: cache.get(&t.object).expect("scored above"),
            triplet: t.clone(),
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterFunnel {
    pub input: usize,
    pub kept: usize,
    pub rejected: usize,
}

/// Keeps triplets whose subject and object probabilities are both strictly
/// greater than `threshold`.
pub fn filter_scored(scored: &[ScoredTriplet], threshold: f64) -> Result<(Vec<Triplet>, FilterFunnel), NerError> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(NerError::BadThreshold(threshold));
    }
    let kept: Vec<Triplet> = scored
        .iter()
        .filter(|s| s.subject_prob > threshold && s.object_prob > threshold)
        .map(|s| s.triplet.clone())
        .collect();
    let funnel = FilterFunnel {
        input: scored.len(),
        kept: kept.len(),
        rejected: scored.len() - kept.len(),
    };
    Ok((kept, funnel))
}

/// Drops exact repeats of (subject, relation, object), keeping the first.
pub fn dedup_triplets(triplets: Vec<Triplet>) -> Vec<Triplet> {
    let mut seen = HashSet::new();
    triplets
        .into_iter()
        .filter(|t| seen.insert((t.subject.clone(), t.relation.clone(), t.object.clone())))
        .collect()
}

pub fn save_scored(scored: &[ScoredTriplet], path: &Path) -> io::Result<()> {
    let mut out = io::BufWriter::new(File::create(path)?);
    for s in scored {
        serde_json::to_writer(&mut out, s)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn load_scored(path: &Path) -> io::Result<Vec<ScoredTriplet>> {
    let mut out = Vec::new();
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line).map_err(io::Error::other)?);
        }
    }
    Ok(out)
}
