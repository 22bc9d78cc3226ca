//! TF-IDF relevance ranking of documents against a fixed term query.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Document;
use crate::text::index_tokens;

#[derive(Debug, Error, PartialEq)]
pub enum RelevanceError {
    #[error("cannot build a vocabulary from an empty corpus")]
    EmptyCorpus,
    #[error("query has no usable terms")]
    EmptyQuery,
    #[error("k must be at least 1")]
    ZeroK,
}

/// Thesaurus terms the corpus is ranked against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermQuery {
    terms: Vec<String>,
}

impl TermQuery {
    pub fn new<S: AsRef<str>>(terms: &[S]) -> Result<Self, RelevanceError> {
        let terms: Vec<String> = terms.iter().map(|t| t.as_ref().trim().to_string()).collect();
        if terms.is_empty() || terms.iter().any(|t| index_tokens(t).is_empty()) {
            return Err(RelevanceError::EmptyQuery);
        }
        Ok(Self { terms })
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    /// Token sequences of the multi-word terms.
    pub fn phrases(&self) -> Vec<Vec<String>> {
        self.terms
            .iter()
            .map(|t| index_tokens(t))
            .filter(|toks| toks.len() > 1)
            .collect()
    }

    pub fn joined(&self) -> String {
        self.terms.join(" ")
    }
}

/// Token → index, document frequency and IDF.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    index: HashMap<String, u32>,
    df: Vec<u64>,
    idf: Vec<f64>,
    n_docs: u64,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.df.len()
    }

    pub fn is_empty(&self) -> bool {
        self.df.is_empty()
    }

    pub fn n_docs(&self) -> u64 {
        self.n_docs
    }

    pub fn index_of(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn df(&self, token: &str) -> Option<u64> {
        self.index_of(token).map(|i| self.df[i as usize])
    }

    pub fn idf(&self, token: &str) -> Option<f64> {
        self.index_of(token).map(|i| self.idf[i as usize])
    }

    pub fn tokens(&self) -> Vec<&str> {
        let mut out = vec![""; self.len()];
        for (t, &i) in &self.index {
            out[i as usize] = t;
        }
        out
    }
}

/// Text that is indexed for a document: title then body.
pub fn document_text(doc: &Document) -> String {
    if doc.title.is_empty() {
        doc.body.clone()
    } else {
        format!("{}\n{}", doc.title, doc.body)
    }
}

/// Smoothed IDF: `ln((1 + N) / (1 + df)) + 1`.
pub fn smoothed_idf(n_docs: u64, df: u64) -> f64 {
    ((1.0 + n_docs as f64) / (1.0 + df as f64)).ln() + 1.0
}

/// Builds the vocabulary over every token with document frequency `>= min_df`.
/// Indices follow lexicographic token order.
pub fn build_vocabulary<'a, I>(docs: I, min_df: u64) -> Result<Vocabulary, RelevanceError>
where
    I: IntoIterator<Item = &'a Document>,
{
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    let mut n_docs = 0u64;
    for doc in docs {
        n_docs += 1;
        let mut uniq = index_tokens(&document_text(doc));
        uniq.sort_unstable();
        uniq.dedup();
        for t in uniq {
            *counts.entry(t).or_default() += 1;
        }
    }
    if n_docs == 0 {
        return Err(RelevanceError::EmptyCorpus);
    }
    let mut index = HashMap::new();
    let mut df = Vec::new();
    let mut idf = Vec::new();
    for (token, count) in counts.into_iter().filter(|(_, c)| *c >= min_df) {
        index.insert(token, df.len() as u32);
        df.push(count);
        idf.push(smoothed_idf(n_docs, count));
    }
    Ok(Vocabulary { index, df, idf, n_docs })
}

/// Sparse weight vector with its Euclidean norm cached. Entries are sorted by
/// index and never zero.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseVector {
    entries: Vec<(u32, f64)>,
    sq_norm: f64,
    norm: f64,
}

impl SparseVector {
    pub fn from_entries(entries: impl IntoIterator<Item = (u32, f64)>) -> Self {
        let mut merged: BTreeMap<u32, f64> = BTreeMap::new();
        for (i, w) in entries {
            *merged.entry(i).or_default() += w;
        }
        let entries: Vec<(u32, f64)> = merged.into_iter().filter(|(_, w)| *w != 0.0).collect();
        let sq_norm = entries.iter().map(|(_, w)| w * w).sum::<f64>();
        Self {
            entries,
            sq_norm,
            norm: sq_norm.sqrt(),
        }
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, index: u32) -> f64 {
        self.entries
            .binary_search_by_key(&index, |(i, _)| *i)
            .map(|pos| self.entries[pos].1)
            .unwrap_or(0.0)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::from_entries(self.entries.iter().map(|&(i, w)| (i, w * factor)))
    }

    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (mut i, mut j) = (0, 0);
        let mut sum = 0.0;
        while i < self.entries.len() && j < other.entries.len() {
            let (ia, wa) = self.entries[i];
            let (ib, wb) = other.entries[j];
            match ia.cmp(&ib) {
                Ordering::Less => i += 1,
                Ordering::Greater => j += 1,
                Ordering::Equal => {
                    sum += wa * wb;
                    i += 1;
                    j += 1;
                }
            }
        }
        sum
    }
}

/// Raw-count TF × IDF. Out-of-vocabulary tokens are ignored.
pub fn vectorize(text: &str, vocab: &Vocabulary) -> SparseVector {
    vectorize_tokens(&index_tokens(text), vocab, &[])
}

/// Like [`vectorize`], but each occurrence of one of `phrases` as a contiguous
/// token run adds one count to every constituent token.
pub fn vectorize_with_phrases(text: &str, vocab: &Vocabulary, phrases: &[Vec<String>]) -> SparseVector {
    vectorize_tokens(&index_tokens(text), vocab, phrases)
}

fn vectorize_tokens(tokens: &[String], vocab: &Vocabulary, phrases: &[Vec<String>]) -> SparseVector {
    let mut tf: HashMap<u32, u64> = HashMap::new();
    for t in tokens {
        if let Some(i) = vocab.index_of(t) {
            *tf.entry(i).or_default() += 1;
        }
    }
    for phrase in phrases {
        let hits = tokens.windows(phrase.len()).filter(|w| w == &phrase.as_slice()).count() as u64;
        if hits == 0 {
            continue;
        }
        for t in phrase {
            if let Some(i) = vocab.index_of(t) {
                *tf.entry(i).or_default() += hits;
            }
        }
    }
    SparseVector::from_entries(tf.into_iter().map(|(i, c)| (i, c as f64 * vocab.idf[i as usize])))
}

/// `dot(a, b) / (|a| |b|)`, or 0 when either vector is empty.
pub fn cosine_similarity(a: &SparseVector, b: &SparseVector) -> f64 {
    if a.norm == 0.0 || b.norm == 0.0 {
        return 0.0;
    }
    // sqrt(|a|^2 |b|^2) keeps cos(a, a) at exactly 1.
    (a.dot(b) / (a.sq_norm * b.sq_norm).sqrt()).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranked {
    pub doc_id: String,
    pub score: f64,
}

/// Score descending, then id ascending.
pub fn rank_order(a: &Ranked, b: &Ranked) -> Ordering {
    b.score.total_cmp(&a.score).then_with(|| a.doc_id.cmp(&b.doc_id))
}

/// Pluggable similarity backend for the relevance filter.
pub trait RelevanceScorer: Sync {
    fn score(&self, doc: &Document, query: &TermQuery) -> f64;
}

/// TF-IDF cosine against the vectorized, concatenated query terms.
pub struct TfIdfScorer<'v> {
    vocab: &'v Vocabulary,
    phrase_matching: bool,
}

impl<'v> TfIdfScorer<'v> {
    pub fn new(vocab: &'v Vocabulary) -> Self {
        Self {
            vocab,
            phrase_matching: true,
        }
    }

    pub fn without_phrases(vocab: &'v Vocabulary) -> Self {
        Self {
            vocab,
            phrase_matching: false,
        }
    }

    fn query_vector(&self, query: &TermQuery) -> SparseVector {
        vectorize(&query.joined(), self.vocab)
    }

    fn doc_vector(&self, doc: &Document, query: &TermQuery) -> SparseVector {
        let phrases = if self.phrase_matching {
            query.phrases()
        } else {
            Vec::new()
        };
        vectorize_with_phrases(&document_text(doc), self.vocab, &phrases)
    }
}

impl RelevanceScorer for TfIdfScorer<'_> {
    fn score(&self, doc: &Document, query: &TermQuery) -> f64 {
        cosine_similarity(&self.doc_vector(doc, query), &self.query_vector(query))
    }
}

/// Selection rule for the filter: top `k`, a score floor, or both.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct Cutoff {
    pub top_k: Option<usize>,
    pub min_score: Option<f64>,
}

/// Scores every document and keeps the best `cutoff.top_k` (ties by id), then
/// drops anything under `cutoff.min_score`. A `k` larger than the corpus
/// returns every document.
pub fn rank_documents(
    docs: &[Document],
    query: &TermQuery,
    scorer: &dyn RelevanceScorer,
    cutoff: Cutoff,
) -> Result<Vec<Ranked>, RelevanceError> {
    if cutoff.top_k == Some(0) {
        return Err(RelevanceError::ZeroK);
    }
    let k = cutoff.top_k.unwrap_or(docs.len());
    if k > docs.len() {
        log::info!("k = {k} exceeds corpus size {}; returning all documents", docs.len());
    }
    // Per-chunk partial top-k, merged under the same total order. The result
    // does not depend on how rayon splits the work.
    let chunk = (docs.len() / rayon::current_num_threads().max(1)).max(64);
    let partials: Vec<Vec<Ranked>> = docs
        .par_chunks(chunk)
        .map(|part| {
            let mut ranked: Vec<Ranked> = part
                .iter()
                .map(|d| Ranked {
                    doc_id: d.id.clone(),
                    score: scorer.score(d, query),
                })
                .collect();
            ranked.sort_by(rank_order);
            ranked.truncate(k);
            ranked
        })
        .collect();
    let mut merged: Vec<Ranked> = partials.into_iter().flatten().collect();
    merged.sort_by(rank_order);
    merged.truncate(k);
    if let Some(floor) = cutoff.min_score {
        merged.retain(|r| r.score >= floor);
    }
    Ok(merged)
}

/// Top-`k` documents by TF-IDF cosine to the query.
pub fn knn_filter(
    docs: &[Document],
    query: &TermQuery,
    vocab: &Vocabulary,
    k: usize,
) -> Result<Vec<Ranked>, RelevanceError> {
    rank_documents(
        docs,
        query,
        &TfIdfScorer::new(vocab),
        Cutoff {
            top_k: Some(k),
            min_score: None,
        },
    )
}

/// `doc_id,score` with six decimals.
pub fn write_ranking_csv<W: Write>(ranking: &[Ranked], mut out: W) -> std::io::Result<()> {
    writeln!(out, "doc_id,score")?;
    for r in ranking {
        writeln!(out, "{},{:.6}", csv_field(&r.doc_id), r.score)?;
    }
    Ok(())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
