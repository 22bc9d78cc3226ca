use std::collections::HashMap;

use super::ScorePair;
pub use crate::text::word_tokens as tokenize_for_rouge;

/// Clipped n-gram overlap: sum over n-gram types of min(count in a, count in b).
pub fn ngram_overlap<S: AsRef<str>>(a: &[S], b: &[S], n: usize) -> usize {
    assert!(n >= 1, "n-gram order must be at least 1");
    let ca = ngram_counts(a, n);
    let cb = ngram_counts(b, n);
    ca.iter().map(|(g, &x)| cb.get(g).map_or(0, |&y| x.min(y))).sum()
}

fn ngram_counts<S: AsRef<str>>(toks: &[S], n: usize) -> HashMap<Vec<&str>, usize> {
    let mut m: HashMap<Vec<&str>, usize> = HashMap::new();
    for w in toks.windows(n) {
        *m.entry(w.iter().map(AsRef::as_ref).collect()).or_default() += 1;
    }
    m
}

fn ngram_count(len: usize, n: usize) -> usize {
    (len + 1).saturating_sub(n)
}

pub fn rouge_n<S: AsRef<str>>(candidate: &[S], reference: &[S], n: usize) -> ScorePair {
    let overlap = ngram_overlap(candidate, reference, n) as f64;
    let p = overlap / ngram_count(candidate.len(), n).max(1) as f64;
    let r = overlap / ngram_count(reference.len(), n).max(1) as f64;
    ScorePair::from_pr(p, r)
}

/// Longest common subsequence length, two-row DP.
pub fn lcs_len<S: AsRef<str>>(a: &[S], b: &[S]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x.as_ref() == y.as_ref() {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub fn rouge_l<S: AsRef<str>>(candidate: &[S], reference: &[S]) -> ScorePair {
    let l = lcs_len(candidate, reference) as f64;
    let p = if candidate.is_empty() {
        0.0
    } else {
        l / candidate.len() as f64
    };
    let r = if reference.is_empty() {
        0.0
    } else {
        l / reference.len() as f64
    };
    ScorePair::from_pr(p, r)
}
