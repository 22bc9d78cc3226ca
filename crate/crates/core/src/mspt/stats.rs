use serde::{Deserialize, Serialize};

use super::MsptError;
use super::special::{normal_two_sided, student_t_two_sided};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance, two-pass.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub t_stat: f64,
    pub dof: f64,
    pub p_value: f64,
}

fn check_sizes(a: &[f64], b: &[f64]) -> Result<(), MsptError> {
    let n = a.len().min(b.len());
    if n < 2 {
        return Err(MsptError::TooFewSamples { needed: 2, got: n });
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(MsptError::NonFinite);
    }
    Ok(())
}

/// Two-sided Welch t-test for unpaired samples.
///
/// When both variances are zero the statistic is undefined and
/// `DegenerateSamples` carries the conventional p-value: 1 for equal means,
/// 0 otherwise.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<TestResult, MsptError> {
    check_sizes(a, b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, mb) = (mean(a), mean(b));
    let (qa, qb) = (variance(a) / na, variance(b) / nb);
    let se2 = qa + qb;
    if se2 == 0.0 {
        return Err(MsptError::DegenerateSamples {
            mean_a: ma,
            mean_b: mb,
            p_value: if ma == mb { 1.0 } else { 0.0 },
        });
    }
    let t_stat = (ma - mb) / se2.sqrt();
    let dof = se2 * se2 / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
    Ok(TestResult {
        t_stat,
        dof,
        p_value: student_t_two_sided(t_stat, dof),
    })
}

/// Two-sided Mann–Whitney U test, normal approximation with tie and
/// continuity corrections. `t_stat` holds U for `a`; `dof` is unused (0).
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<TestResult, MsptError> {
    check_sizes(a, b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let mut all: Vec<(f64, bool)> = a
        .iter()
        .map(|&x| (x, true))
        .chain(b.iter().map(|&x| (x, false)))
        .collect();
    all.sort_by(|x, y| x.0.total_cmp(&y.0));
    let n = all.len() as f64;
    let mut rank_sum_a = 0.0;
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j + 1 < all.len() && all[j + 1].0 == all[i].0 {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        let ties = (j - i + 1) as f64;
        tie_term += ties * ties * ties - ties;
        rank_sum_a += all[i..=j].iter().filter(|x| x.1).count() as f64 * avg_rank;
        i = j + 1;
    }
    let u = rank_sum_a - na * (na + 1.0) / 2.0;
    let mu = na * nb / 2.0;
    let sigma2 = na * nb / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if sigma2 <= 0.0 {
        return Err(MsptError::DegenerateSamples {
            mean_a: mean(a),
            mean_b: mean(b),
            p_value: 1.0,
        });
    }
    let diff = (u - mu).abs();
    let z = (diff - 0.5).max(0.0) / sigma2.sqrt();
    Ok(TestResult {
        t_stat: u,
        dof: 0.0,
        p_value: normal_two_sided(z).clamp(0.0, 1.0),
    })
}
