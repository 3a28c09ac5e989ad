//! Gamma-family helpers shared by the Mittag-Leffler kernels and the
//! fractional operators.

use std::f64::consts::PI;

pub fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

pub fn ln_gamma_abs(x: f64) -> f64 {
    libm::lgamma_r(x).0
}

/// `sin(pi * x)` with exact argument reduction, so integers give exact zeros.
pub fn sin_pi(x: f64) -> f64 {
    let n = x.round();
    let r = x - n;
    let s = (PI * r).sin();
    if (n as i64) % 2 == 0 {
        s
    } else {
        -s
    }
}

/// `1 / Gamma(x)`, entire; zero at the non-positive integers.
pub fn rgamma(x: f64) -> f64 {
    if x <= 0.0 && x == x.floor() {
        return 0.0;
    }
    if x < 0.5 {
        // reflection: 1/Gamma(x) = sin(pi x) Gamma(1 - x) / pi
        let y = 1.0 - x;
        if y < 170.0 {
            sin_pi(x) * gamma(y) / PI
        } else {
            let s = sin_pi(x);
            s.signum() * (ln_gamma_abs(y) + s.abs().ln() - PI.ln()).exp()
        }
    } else if x < 170.0 {
        1.0 / gamma(x)
    } else {
        (-ln_gamma_abs(x)).exp()
    }
}

/// Returns `(ln |1/Gamma(x)|, sign)`, with `sign == 0` at the poles of Gamma.
pub fn ln_rgamma(x: f64) -> (f64, f64) {
    if x <= 0.0 && x == x.floor() {
        return (f64::NEG_INFINITY, 0.0);
    }
    if x < 0.5 {
        let s = sin_pi(x);
        (
            ln_gamma_abs(1.0 - x) + s.abs().ln() - PI.ln(),
            s.signum(),
        )
    } else {
        (-ln_gamma_abs(x), 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reciprocal_gamma_values() {
        assert!((rgamma(1.0) - 1.0).abs() < 1e-15);
        assert!((rgamma(0.5) - 1.0 / PI.sqrt()).abs() < 1e-15);
        assert_eq!(rgamma(0.0), 0.0);
        assert_eq!(rgamma(-3.0), 0.0);
        // Gamma(-0.5) = -2 sqrt(pi)
        assert!((rgamma(-0.5) + 1.0 / (2.0 * PI.sqrt())).abs() < 1e-15);
        let (l, s) = ln_rgamma(-0.5);
        assert!((s * l.exp() - rgamma(-0.5)).abs() < 1e-15);
        assert!((rgamma(200.0) - (-ln_gamma_abs(200.0)).exp()).abs() == 0.0);
    }

    #[test]
    fn sin_pi_is_exact_at_integers() {
        for k in -5..5 {
            assert_eq!(sin_pi(k as f64), 0.0);
        }
        assert!((sin_pi(0.5) - 1.0).abs() < 1e-16);
        assert!((sin_pi(1.5) + 1.0).abs() < 1e-16);
    }
}
