mod common;

use common::{exp_sq_erfc, ml_series};
use fracdiff::mlf::*;
use fracdiff::quad;
use proptest::prelude::*;
use rug::ops::Pow;
use rug::Float;

fn p(a: f64, b: f64) -> MlParams {
    MlParams::new(a, b).unwrap()
}

#[test]
fn half_order_at_minus_one() {
    let v = ml(p(0.5, 1.0), -1.0).unwrap();
    assert!((v - exp_sq_erfc(1.0)).abs() < 1e-15, "{v}");
    assert!((v - 0.427_583_576_155_807).abs() < 1e-14);
}

#[test]
fn half_half_at_minus_ten_against_the_series() {
    // the partial sums need well over 200 terms to settle at z = -10
    let oracle = ml_series(0.5, 0.5, -10.0, 200);
    let v = ml(p(0.5, 0.5), -10.0).unwrap();
    assert!((v - oracle).abs() < 1e-12, "{v} vs {oracle}");
}

/// `E_{α,1}(-x) = Σ_{k=1}^{K} (-1)^{k+1} x^{-k} / Γ(1 - αk)` for large `x`.
fn asymptotic_oracle(alpha: f64, x: f64, terms: u32) -> f64 {
    let mut s = Float::with_val(200, 0);
    for k in 1..=terms {
        let arg = Float::with_val(200, 1) - Float::with_val(200, alpha) * k;
        let term = Float::with_val(200, x).pow(-(k as i32)) / arg.gamma();
        if k % 2 == 1 {
            s += term;
        } else {
            s -= term;
        }
    }
    s.to_f64()
}

#[test]
fn decay_bound_examples() {
    let w = ml_e1_bound_check(0.3, 100.0).unwrap();
    assert!(w.holds && w.value <= w.constant / 101.0);
    let oracle = asymptotic_oracle(0.3, 100.0, 8);
    assert!((w.value - oracle).abs() < 1e-12 * oracle.abs().max(1e-3), "{} vs {oracle}", w.value);

    let w = ml_e1_bound_check(0.9, 1.0).unwrap();
    assert!(w.holds && w.value > 0.0 && w.value < 1.0);
    assert!((w.value - ml_series(0.9, 1.0, -1.0, 0)).abs() < 1e-14);
}

#[test]
fn kernel_weight_unit_interval() {
    let w = kernel_weight(0.5, 1.0, 0.0, 1.0).unwrap();
    let oracle = 1.0 - exp_sq_erfc(1.0);
    assert!((w - oracle).abs() < 1e-13, "{w} vs {oracle}");
    assert!(kernel_weight(0.5, 1.0, 1.0, 1.0).is_err());
    assert!(kernel_weight(0.5, 1.0, 2.0, 1.0).is_err());
}

#[test]
fn tables_reproduce_direct_evaluation_on_a_sweep() {
    for alpha in [0.2, 0.45, 0.7, 0.95] {
        for beta in [alpha, 1.0, alpha + 1.0, alpha + 2.0] {
            let table = MlTable::new(p(alpha, beta));
            for i in 0..400 {
                let x = 10f64.powf(-4.0 + 10.0 * i as f64 / 399.0);
                let direct = ml(p(alpha, beta), -x).unwrap();
                let tab = table.eval_neg(x);
                assert!((tab - direct).abs() <= 1e-13 * direct.abs().max(1e-300) + 1e-300, "({alpha}, {beta}, {x}): {tab} vs {direct}");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn random_points_match_the_series_oracle(alpha in 0.3f64..1.0, beta in 0.5f64..2.0, s in 0.0f64..60.0) {
        let z = -s.powf(alpha);
        let oracle = ml_series(alpha, beta, z, 0);
        let v = ml(p(alpha, beta), z).unwrap();
        prop_assert!((v - oracle).abs() < 1e-10, "{} vs {}", v, oracle);
    }

    #[test]
    fn relaxation_is_positive_and_decreasing(alpha in 0.05f64..1.0, x in 0.0f64..1e5, dx in 1e-6f64..1e3) {
        let pr = p(alpha, 1.0);
        let a = ml(pr, -x).unwrap();
        let b = ml(pr, -(x + dx)).unwrap();
        prop_assert!(a > 0.0 && b > 0.0);
        prop_assert!(b <= a * (1.0 + 1e-14), "E(-{}) = {} < E(-{}) = {}", x, a, x + dx, b);
    }

    #[test]
    fn unit_order_is_the_exponential(z in -30.0f64..5.0) {
        let v = ml(p(1.0, 1.0), z).unwrap();
        prop_assert!((v - z.exp()).abs() <= 1e-12 * z.exp().max(1e-300));
    }

    #[test]
    fn regimes_agree_across_their_seams(alpha in 0.2f64..1.0, beta in 0.3f64..2.5, nudge in -1e-6f64..1e-6) {
        let pr = p(alpha, beta);
        let asym_seam = X_SWITCH.powf(alpha);
        prop_assert_eq!(select_method(alpha, SERIES_LIMIT * 0.999), MlMethod::Series);
        prop_assert_eq!(select_method(alpha, SERIES_LIMIT * 1.001), MlMethod::Integral);
        prop_assert_eq!(select_method(alpha, asym_seam * 1.001), MlMethod::Asymptotic);
        for (seam, pair) in [(SERIES_LIMIT, [MlMethod::Series, MlMethod::Integral]), (asym_seam, [MlMethod::Integral, MlMethod::Asymptotic])] {
            let z = -seam * (1.0 + nudge);
            let a = ml_with_method(pr, z, pair[0]).unwrap();
            let b = ml_with_method(pr, z, pair[1]).unwrap();
            prop_assert!((a - b).abs() < 1e-10, "seam {}: {:?} {} vs {:?} {}", seam, pair[0], a, pair[1], b);
        }
    }

    #[test]
    fn kernel_weights_are_additive(alpha in 0.1f64..1.0, lambda in 0.0f64..500.0, a in 0.0f64..2.0, d1 in 1e-6f64..1.0, d2 in 1e-6f64..1.0) {
        let (b, c) = (a + d1, a + d1 + d2);
        let ab = kernel_weight(alpha, lambda, a, b).unwrap();
        let bc = kernel_weight(alpha, lambda, b, c).unwrap();
        let ac = kernel_weight(alpha, lambda, a, c).unwrap();
        prop_assert!((ab + bc - ac).abs() <= 1e-12 * ac.abs().max(1e-300) + 1e-15, "{} + {} vs {}", ab, bc, ac);
    }

    #[test]
    fn kernel_weight_matches_adaptive_quadrature(alpha in 0.1f64..1.0, lambda in 0.0f64..50.0, a in 0.0f64..2.0, d in 1e-4f64..2.0) {
        let b = a + d;
        let pr = p(alpha, alpha);
        let k = |t: f64| if t <= 0.0 { 0.0 } else { t.powf(alpha - 1.0) * ml(pr, -lambda * t.powf(alpha)).unwrap() };
        // log-graded breakpoints resolve the t^{α-1} singularity at the origin
        let mut bps = vec![a];
        if a == 0.0 {
            bps.extend((0..30).rev().map(|k| b * 2f64.powi(-(k + 1))));
        }
        bps.push(b);
        let (oracle, _) = quad::integrate(k, &bps, 1e-15, 1e-13, 2000);
        let w = kernel_weight(alpha, lambda, a, b).unwrap();
        prop_assert!((w - oracle).abs() < 1e-9, "{} vs {}", w, oracle);
    }
}
