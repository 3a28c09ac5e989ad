//! Test-only oracles shared by the integration targets.
#![allow(dead_code)]

use rug::ops::Pow;
use rug::Float;
use std::io::Write;

/// Working precision of the series oracle, in bits (about 120 decimal digits).
const ORACLE_PREC: u32 = 400;

/// `E_{α,β}(z) = Σ z^k / Γ(αk + β)` summed in multiple precision.
///
/// Summation runs for at least `min_terms` terms and then until the terms drop
/// below `1e-70` relative to the partial sum. With `|z|^{1/α} ≤ 100` the
/// largest term stays below `e^{100}`, so 400 bits leave more than 50 correct
/// digits after cancellation.
pub fn ml_series(alpha: f64, beta: f64, z: f64, min_terms: usize) -> f64 {
    let p = ORACLE_PREC;
    let a = Float::with_val(p, alpha);
    let b = Float::with_val(p, beta);
    let zf = Float::with_val(p, z);
    let tiny = Float::with_val(p, 1e-70);
    let mut sum = Float::with_val(p, 0);
    let mut zk = Float::with_val(p, 1);
    let mut k: u32 = 0;
    loop {
        let arg = Float::with_val(p, &a * k) + &b;
        let term = Float::with_val(p, &zk / arg.gamma());
        sum += &term;
        let small = Float::with_val(p, term.abs_ref()) < Float::with_val(p, &tiny * Float::with_val(p, sum.abs_ref()).max(&Float::with_val(p, 1)));
        if k as usize >= min_terms && small {
            break;
        }
        assert!(k < 200_000, "series oracle did not converge for ({alpha}, {beta}, {z})");
        zk *= &zf;
        k += 1;
    }
    sum.to_f64()
}

/// `e^{x²} erfc(x)` in multiple precision.
pub fn exp_sq_erfc(x: f64) -> f64 {
    let xf = Float::with_val(ORACLE_PREC, x);
    let e = Float::with_val(ORACLE_PREC, xf.clone().pow(2u32)).exp();
    (e * xf.erfc()).to_f64()
}

/// One result line, written past libtest's output capture.
pub fn report(criterion: u32, title: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "criterion {criterion:2} {verdict} {title}: {detail}");
    let _ = out.flush();
}

pub fn sup_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Supplementary line under a criterion, also past the capture.
pub fn note(text: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "             {text}");
    let _ = out.flush();
}
