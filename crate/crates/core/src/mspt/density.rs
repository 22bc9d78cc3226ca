use serde::{Deserialize, Serialize};

use super::MsptError;
use super::stats::variance;

pub const BANDWIDTH_FLOOR: f64 = 1e-6;

/// Linear-interpolation quantile of sorted data (the common "type 7").
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Silverman's rule: 0.9 · min(σ, IQR/1.34) · n^(-1/5). If one spread
/// measure is zero the other is used; the result never drops below
/// [`BANDWIDTH_FLOOR`].
pub fn silverman_bandwidth(samples: &[f64]) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let sigma = variance(samples).sqrt();
    let iqr = (quantile(&sorted, 0.75) - quantile(&sorted, 0.25)) / 1.34;
    let spread = match (sigma > 0.0, iqr > 0.0) {
        (true, true) => sigma.min(iqr),
        (true, false) => sigma,
        (false, true) => iqr,
        (false, false) => 0.0,
    };
    (0.9 * spread * (samples.len() as f64).powf(-0.2)).max(BANDWIDTH_FLOOR)
}

fn check_samples(samples: &[f64]) -> Result<(), MsptError> {
    if samples.len() < 2 {
        return Err(MsptError::TooFewSamples {
            needed: 2,
            got: samples.len(),
        });
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(MsptError::NonFinite);
    }
    Ok(())
}

/// Gaussian KDE at `points` equally spaced x over [min − 3h, max + 3h].
pub fn kde_curve(samples: &[f64], points: usize) -> Result<Vec<(f64, f64)>, MsptError> {
    check_samples(samples)?;
    if points < 2 {
        return Err(MsptError::TooFewPoints(points));
    }
    let h = silverman_bandwidth(samples);
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min) - 3.0 * h;
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 3.0 * h;
    let step = (hi - lo) / (points - 1) as f64;
    let norm = 1.0 / (samples.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    Ok((0..points)
        .map(|k| {
            let x = if k == points - 1 { hi } else { lo + k as f64 * step };
            let d: f64 = samples
                .iter()
                .map(|s| {
                    let u = (x - s) / h;
                    (-0.5 * u * u).exp()
                })
                .sum();
            (x, d * norm)
        })
        .collect())
}

/// Trapezoidal integral of a sampled curve.
pub fn trapezoid(curve: &[(f64, f64)]) -> f64 {
    curve
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub left: f64,
    pub right: f64,
    pub count: usize,
}

/// Equal-width bins over [min, max]: each bin is [left, right) except the
/// last, which is closed. Constant samples are binned over [v − 0.5, v + 0.5];
/// an empty sample set over [0, 1].
pub fn histogram(samples: &[f64], bins: usize) -> Result<Vec<Bin>, MsptError> {
    if bins == 0 {
        return Err(MsptError::ZeroBins);
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(MsptError::NonFinite);
    }
    let (mut lo, mut hi) = if samples.is_empty() {
        (0.0, 1.0)
    } else {
        (
            samples.iter().copied().fold(f64::INFINITY, f64::min),
            samples.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        )
    };
    if lo == hi {
        lo -= 0.5;
        hi += 0.5;
    }
    let width = (hi - lo) / bins as f64;
    let edge = |k: usize| if k == bins { hi } else { lo + k as f64 * width };
    let mut counts = vec![0usize; bins];
    for &x in samples {
        let mut k = (((x - lo) / width).floor().max(0.0) as usize).min(bins - 1);
        // settle rounding at the edges so membership matches the bin bounds
        while k > 0 && x < edge(k) {
            k -= 1;
        }
        while k + 1 < bins && x >= edge(k + 1) {
            k += 1;
        }
        counts[k] += 1;
    }
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(k, count)| Bin {
            left: edge(k),
            right: edge(k + 1),
            count,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_symmetry() {
        let c = kde_curve(&[0.0, 1.0], 201).unwrap();
        for k in 0..c.len() {
            let (x, d) = c[k];
            let (xm, dm) = c[c.len() - 1 - k];
            assert!((x - 0.5 + (xm - 0.5)).abs() < 1e-9);
            assert!((d - dm).abs() < 1e-9);
        }
        assert!((trapezoid(&c) - 1.0).abs() < 0.02);
    }

    #[test]
    fn constant_samples_use_floor() {
        let s = [0.7; 10];
        assert_eq!(silverman_bandwidth(&s), BANDWIDTH_FLOOR);
        let c = kde_curve(&s, 401).unwrap();
        assert!((trapezoid(&c) - 1.0).abs() < 0.02);
        let (xmax, _) = c.iter().copied().fold((0.0, 0.0), |a, p| if p.1 > a.1 { p } else { a });
        assert!((xmax - 0.7).abs() < 1e-6);
    }

    #[test]
    fn kde_errors() {
        assert!(matches!(kde_curve(&[1.0], 10), Err(MsptError::TooFewSamples { .. })));
        assert!(matches!(kde_curve(&[1.0, 2.0], 1), Err(MsptError::TooFewPoints(1))));
    }

    #[test]
    fn histogram_cases() {
        let h = histogram(&[0.1, 0.9], 2).unwrap();
        assert_eq!(h.iter().map(|b| b.count).collect::<Vec<_>>(), [1, 1]);
        let h = histogram(&[0.3; 5], 4).unwrap();
        assert_eq!(h.iter().filter(|b| b.count > 0).count(), 1);
        assert_eq!(h.iter().map(|b| b.count).sum::<usize>(), 5);
        assert!(histogram(&[], 3).unwrap().iter().all(|b| b.count == 0));
        assert!(matches!(histogram(&[1.0], 0), Err(MsptError::ZeroBins)));
    }
}
