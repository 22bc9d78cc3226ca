//! ROUGE-1/2/L and BERTScore, and evaluation of prediction files against gold.

mod bertscore;
mod embed;
mod rouge;

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{DatasetError, Record, read_split_csv};
use crate::text::word_tokens;

pub use bertscore::{TokenEmbeddings, bertscore};
pub use embed::{CachedEmbedder, EmbeddingProvider, HttpEmbedder, ToyEmbedder, parse_embed_response};
pub use rouge::{lcs_len, ngram_overlap, rouge_l, rouge_n, tokenize_for_rouge};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("embedding dimensions differ: candidate {candidate}, reference {reference}")]
    DimensionMismatch { candidate: usize, reference: usize },
    #[error("candidate or reference has no tokens")]
    EmptySide,
    #[error("row {row}: {message}")]
    RowMisalignment { row: usize, message: String },
    #[error("embedder protocol error: {0}")]
    Protocol(String),
    #[error("embedder unavailable: {0}")]
    EmbedderUnavailable(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ScorePair {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl ScorePair {
    /// F1 is the harmonic mean, or 0 when `p + r <= 0`.
    pub fn from_pr(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self { precision, recall, f1 }
    }

    /// Component-wise arithmetic mean, summed in order; zeros when empty.
    pub fn mean(pairs: &[ScorePair]) -> ScorePair {
        if pairs.is_empty() {
            return ScorePair::default();
        }
        let n = pairs.len() as f64;
        let (p, r, f) = pairs.iter().fold((0.0, 0.0, 0.0), |(p, r, f), s| {
            (p + s.precision, r + s.recall, f + s.f1)
        });
        ScorePair {
            precision: p / n,
            recall: r / n,
            f1: f / n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowScores {
    pub rouge1: ScorePair,
    pub rouge2: ScorePair,
    #[serde(rename = "rougeL")]
    pub rouge_l: ScorePair,
    pub bertscore: ScorePair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreColumns {
    pub rouge1: Vec<ScorePair>,
    pub rouge2: Vec<ScorePair>,
    #[serde(rename = "rougeL")]
    pub rouge_l: Vec<ScorePair>,
    pub bertscore: Vec<ScorePair>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub embedder: String,
    pub rows: usize,
    pub aggregate: RowScores,
    pub per_row: ScoreColumns,
}

/// Checks that the two files describe the same rows: equal counts and equal
/// subject and relation columns.
pub fn check_alignment(predictions: &[Record], gold: &[Record]) -> Result<(), MetricsError> {
    if predictions.len() != gold.len() {
        return Err(MetricsError::RowMisalignment {
            row: predictions.len().min(gold.len()) + 1,
            message: format!("{} prediction rows vs {} gold rows", predictions.len(), gold.len()),
        });
    }
    for (i, (p, g)) in predictions.iter().zip(gold).enumerate() {
        if p.subject != g.subject || p.relation != g.relation {
            return Err(MetricsError::RowMisalignment {
                row: i + 1,
                message: format!(
                    "prediction ({:?}, {:?}) vs gold ({:?}, {:?})",
                    p.subject, p.relation, g.subject, g.relation
                ),
            });
        }
    }
    Ok(())
}

/// BERTScore where an empty side scores zero instead of failing.
pub fn bertscore_or_zero(c: &TokenEmbeddings, r: &TokenEmbeddings) -> Result<ScorePair, MetricsError> {
    match bertscore(c, r) {
        Err(MetricsError::EmptySide) => Ok(ScorePair::default()),
        other => other,
    }
}

/// Per-row BERTScore on the object columns.
pub fn bertscore_rows(
    predictions: &[Record],
    gold: &[Record],
    embedder: &dyn EmbeddingProvider,
) -> Result<Vec<ScorePair>, MetricsError> {
    let (pe, ge) = embed_objects(predictions, gold, embedder)?;
    pe.par_iter().zip(&ge).map(|(c, r)| bertscore_or_zero(c, r)).collect()
}

fn embed_objects(
    predictions: &[Record],
    gold: &[Record],
    embedder: &dyn EmbeddingProvider,
) -> Result<(Vec<TokenEmbeddings>, Vec<TokenEmbeddings>), MetricsError> {
    let texts: Vec<String> = predictions.iter().chain(gold).map(|r| r.object.clone()).collect();
    let mut all = embedder.embed(&texts)?;
    if all.len() != texts.len() {
        return Err(MetricsError::Protocol(format!(
            "asked for {} embeddings, got {}",
            texts.len(),
            all.len()
        )));
    }
    let ge = all.split_off(predictions.len());
    Ok((all, ge))
}

/// Scores prediction objects against gold objects row by row.
pub fn evaluate_records(
    predictions: &[Record],
    gold: &[Record],
    embedder: &dyn EmbeddingProvider,
) -> Result<EvalReport, MetricsError> {
    check_alignment(predictions, gold)?;
    let cached = CachedEmbedder::new(embedder);
    let (pe, ge) = embed_objects(predictions, gold, &cached)?;
    let rows: Vec<RowScores> = predictions
        .par_iter()
        .zip(gold)
        .zip(pe.par_iter().zip(&ge))
        .map(|((p, g), (c, r))| {
            let ct = word_tokens(&p.object);
            let rt = word_tokens(&g.object);
            Ok(RowScores {
                rouge1: rouge_n(&ct, &rt, 1),
                rouge2: rouge_n(&ct, &rt, 2),
                rouge_l: rouge_l(&ct, &rt),
                bertscore: bertscore_or_zero(c, r)?,
            })
        })
        .collect::<Result<_, MetricsError>>()?;
    let column = |f: fn(&RowScores) -> ScorePair| rows.iter().map(f).collect::<Vec<_>>();
    let per_row = ScoreColumns {
        rouge1: column(|r| r.rouge1),
        rouge2: column(|r| r.rouge2),
        rouge_l: column(|r| r.rouge_l),
        bertscore: column(|r| r.bertscore),
    };
    let aggregate = RowScores {
        rouge1: ScorePair::mean(&per_row.rouge1),
        rouge2: ScorePair::mean(&per_row.rouge2),
        rouge_l: ScorePair::mean(&per_row.rouge_l),
        bertscore: ScorePair::mean(&per_row.bertscore),
    };
    Ok(EvalReport {
        embedder: embedder.name(),
        rows: rows.len(),
        aggregate,
        per_row,
    })
}

pub fn evaluate_file(
    predictions: &Path,
    gold: &Path,
    embedder: &dyn EmbeddingProvider,
) -> Result<EvalReport, MetricsError> {
    evaluate_records(&read_split_csv(predictions)?, &read_split_csv(gold)?, embedder)
}

/// CSV mirror of the per-row block, one line per row.
pub fn report_csv(report: &EvalReport) -> String {
    let mut out = String::from("row");
    for m in ["rouge1", "rouge2", "rougeL", "bertscore"] {
        for c in ["precision", "recall", "f1"] {
            out.push_str(&format!(",{m}_{c}"));
        }
    }
    out.push('\n');
    let cols = &report.per_row;
    for i in 0..report.rows {
        out.push_str(&(i + 1).to_string());
        for s in [cols.rouge1[i], cols.rouge2[i], cols.rouge_l[i], cols.bertscore[i]] {
            out.push_str(&format!(",{},{},{}", s.precision, s.recall, s.f1));
        }
        out.push('\n');
    }
    out
}

/// Writes `report` as pretty JSON to `path` and its CSV mirror next to it.
pub fn write_eval_report(report: &EvalReport, path: &Path) -> Result<(), MetricsError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let json = serde_json::to_string_pretty(report).map_err(std::io::Error::other)?;
    fs::write(path, json + "\n")?;
    fs::write(path.with_extension("csv"), report_csv(report))?;
    Ok(())
}
