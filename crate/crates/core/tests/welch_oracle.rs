//! Welch t-test against values frozen from a 50-digit mpmath computation
//! (tests/oracles/welch_oracle.py).

use serde::Deserialize;
use tripletforge::mspt::welch_t_test;

#[derive(Deserialize)]
struct Case {
    a: Vec<f64>,
    b: Vec<f64>,
    t: String,
    dof: String,
    p: String,
}

fn cases() -> Vec<Case> {
    let text = include_str!("fixtures/welch_oracle.json");
    serde_json::from_str(text).unwrap()
}

/// Absolute for values of magnitude below 1, relative above.
fn within(got: f64, want: f64, tol: f64) -> bool {
    (got - want).abs() <= tol * want.abs().max(1.0)
}

#[test]
fn matches_high_precision_oracle() {
    let cases = cases();
    assert_eq!(cases.len(), 50);
    let mut worst = (0.0f64, 0.0f64, 0.0f64);
    for (i, c) in cases.iter().enumerate() {
        let r = welch_t_test(&c.a, &c.b).unwrap();
        let (t, dof, p): (f64, f64, f64) = (c.t.parse().unwrap(), c.dof.parse().unwrap(), c.p.parse().unwrap());
        assert!(within(r.t_stat, t, 1e-10), "case {i}: t {} vs {t}", r.t_stat);
        assert!(within(r.dof, dof, 1e-10), "case {i}: dof {} vs {dof}", r.dof);
        assert!((r.p_value - p).abs() <= 1e-10, "case {i}: p {} vs {p}", r.p_value);
        worst.0 = worst.0.max((r.t_stat - t).abs() / t.abs().max(1.0));
        worst.1 = worst.1.max((r.dof - dof).abs() / dof.abs().max(1.0));
        worst.2 = worst.2.max((r.p_value - p).abs());
    }
    println!(
        "worst errors: t {:.1e}, dof {:.1e}, p {:.1e}",
        worst.0, worst.1, worst.2
    );
}

#[test]
fn swap_antisymmetry_is_exact() {
    for c in cases() {
        let ab = welch_t_test(&c.a, &c.b).unwrap();
        let ba = welch_t_test(&c.b, &c.a).unwrap();
        assert_eq!(ab.t_stat, -ba.t_stat);
        assert_eq!(ab.p_value, ba.p_value);
        assert_eq!(ab.dof, ba.dof);
    }
}

#[test]
fn ten_sd_shift_is_vanishingly_unlikely() {
    let c = &cases()[1];
    assert_eq!((c.a.len(), c.b.len()), (200, 200));
    assert!(welch_t_test(&c.a, &c.b).unwrap().p_value < 1e-30);
}

#[test]
fn p_monotone_in_gap() {
    let base: Vec<f64> = (0..40).map(|i| ((i * 37) % 17) as f64 / 17.0).collect();
    let mut last = 1.0;
    for k in 0..60 {
        let shifted: Vec<f64> = base.iter().map(|x| x + k as f64 * 0.02).collect();
        let p = welch_t_test(&base, &shifted).unwrap().p_value;
        assert!(p <= last, "shift {k}: {p} > {last}");
        last = p;
    }
}
