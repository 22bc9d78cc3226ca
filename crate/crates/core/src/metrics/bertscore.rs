use serde::{Deserialize, Serialize};

use super::{MetricsError, ScorePair};

/// Tokens of one text and their vectors, one vector per token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenEmbeddings {
    tokens: Vec<String>,
    vectors: Vec<Vec<f64>>,
}

impl TokenEmbeddings {
    pub fn new(tokens: Vec<String>, vectors: Vec<Vec<f64>>) -> Result<Self, MetricsError> {
        if tokens.len() != vectors.len() {
            return Err(MetricsError::Protocol(format!(
                "{} tokens but {} vectors",
                tokens.len(),
                vectors.len()
            )));
        }
        if let Some(first) = vectors.first() {
            let d = first.len();
            if d == 0 {
                return Err(MetricsError::Protocol("zero-dimensional vector".into()));
            }
            if vectors.iter().any(|v| v.len() != d) {
                return Err(MetricsError::Protocol("vectors of mixed dimension".into()));
            }
            if vectors.iter().flatten().any(|x| !x.is_finite()) {
                return Err(MetricsError::Protocol("non-finite vector component".into()));
            }
        }
        Ok(Self { tokens, vectors })
    }

    pub fn empty() -> Self {
        Self {
            tokens: Vec::new(),
            vectors: Vec::new(),
        }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.vectors.first().map(Vec::len)
    }
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum();
    let nb: f64 = b.iter().map(|x| x * x).sum();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na * nb).sqrt()).clamp(-1.0, 1.0)
}

/// Sums in ascending order so the result does not depend on token order.
fn sorted_sum(xs: impl Iterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = xs.collect();
    v.sort_by(f64::total_cmp);
    v.into_iter().sum()
}

/// Greedy-matching BERTScore without IDF weighting or baseline rescaling.
pub fn bertscore(candidate: &TokenEmbeddings, reference: &TokenEmbeddings) -> Result<ScorePair, MetricsError> {
    let (Some(dc), Some(dr)) = (candidate.dim(), reference.dim()) else {
        return Err(MetricsError::EmptySide);
    };
    if dc != dr {
        return Err(MetricsError::DimensionMismatch {
            candidate: dc,
            reference: dr,
        });
    }
    let sim: Vec<Vec<f64>> = candidate
        .vectors
        .iter()
        .map(|c| reference.vectors.iter().map(|r| cosine(c, r)).collect())
        .collect();
    let p = sorted_sum(
        sim.iter()
            .map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
    ) / candidate.len() as f64;
    let r = sorted_sum((0..reference.len()).map(|j| sim.iter().map(|row| row[j]).fold(f64::NEG_INFINITY, f64::max)))
        / reference.len() as f64;
    Ok(ScorePair::from_pr(p, r))
}
