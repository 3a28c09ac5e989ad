//! Tridiagonal linear algebra: Thomas sweep, pivoted LU solve, Sturm counts.

use crate::error::{Error, Result};

/// Tridiagonal matrix with `sub[i] = A[i+1][i]`, `sup[i] = A[i][i+1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiag {
    pub sub: Vec<f64>,
    pub diag: Vec<f64>,
    pub sup: Vec<f64>,
}

impl Tridiag {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut s = self.diag[i] * x[i];
            if i > 0 {
                s += self.sub[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                s += self.sup[i] * x[i + 1];
            }
            y[i] = s;
        }
        y
    }

    /// Thomas algorithm; intended for diagonally dominant systems.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.len();
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        let mut piv = self.diag[0];
        if piv == 0.0 || !piv.is_finite() {
            return Err(Error::Singular { row: 0 });
        }
        c[0] = if n > 1 { self.sup[0] / piv } else { 0.0 };
        d[0] = rhs[0] / piv;
        for i in 1..n {
            piv = self.diag[i] - self.sub[i - 1] * c[i - 1];
            if piv == 0.0 || !piv.is_finite() {
                return Err(Error::Singular { row: i });
            }
            if i + 1 < n {
                c[i] = self.sup[i] / piv;
            }
            d[i] = (rhs[i] - self.sub[i - 1] * d[i - 1]) / piv;
        }
        for i in (0..n - 1).rev() {
            d[i] -= c[i] * d[i + 1];
        }
        Ok(d)
    }

    /// Gaussian elimination with partial pivoting; zero pivots are replaced by
    /// `tiny`, which is what inverse iteration wants.
    pub fn solve_pivoted(&self, rhs: &[f64], tiny: f64) -> Vec<f64> {
        let n = self.len();
        // row i of U holds u0[i] (diag), u1[i], u2[i]
        let mut u0 = self.diag.clone();
        let mut u1: Vec<f64> = (0..n).map(|i| if i + 1 < n { self.sup[i] } else { 0.0 }).collect();
        let mut u2 = vec![0.0; n];
        let mut b = rhs.to_vec();
        let mut lower = self.sub.clone();
        for i in 0..n.saturating_sub(1) {
            // candidate rows i (u0[i], u1[i], u2[i]) and i+1 (lower[i], diag', sup')
            let mut a_next0 = lower[i];
            let mut a_next1 = u0[i + 1];
            let mut a_next2 = if i + 2 < n { u1[i + 1] } else { 0.0 };
            if a_next0.abs() > u0[i].abs() {
                std::mem::swap(&mut u0[i], &mut a_next0);
                std::mem::swap(&mut u1[i], &mut a_next1);
                std::mem::swap(&mut u2[i], &mut a_next2);
                b.swap(i, i + 1);
            }
            if u0[i] == 0.0 {
                u0[i] = tiny;
            }
            let m = a_next0 / u0[i];
            lower[i] = m;
            u0[i + 1] = a_next1 - m * u1[i];
            if i + 2 < n {
                u1[i + 1] = a_next2 - m * u2[i];
            }
            b[i + 1] -= m * b[i];
        }
        if u0[n - 1] == 0.0 {
            u0[n - 1] = tiny;
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = b[i];
            if i + 1 < n {
                s -= u1[i] * x[i + 1];
            }
            if i + 2 < n {
                s -= u2[i] * x[i + 2];
            }
            x[i] = s / u0[i];
        }
        x
    }
}

/// Number of eigenvalues of the symmetric tridiagonal `(d, e)` below `mu`.
pub fn sturm_count(d: &[f64], e: &[f64], mu: f64) -> usize {
    let mut count = 0;
    let mut q = d[0] - mu;
    let guard = f64::MIN_POSITIVE.sqrt();
    for i in 0..d.len() {
        if i > 0 {
            let prev = if q == 0.0 { guard } else { q };
            q = d[i] - mu - e[i - 1] * e[i - 1] / prev;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Gershgorin bounds of a symmetric tridiagonal matrix.
pub fn gershgorin(d: &[f64], e: &[f64]) -> (f64, f64) {
    let n = d.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = if i > 0 { e[i - 1].abs() } else { 0.0 } + if i + 1 < n { e[i].abs() } else { 0.0 };
        lo = lo.min(d[i] - r);
        hi = hi.max(d[i] + r);
    }
    (lo, hi)
}

/// The `k`-th smallest eigenvalue (0-based) by bisection on Sturm counts.
pub fn bisect_eigenvalue(d: &[f64], e: &[f64], k: usize, bounds: (f64, f64)) -> f64 {
    let (mut lo, mut hi) = bounds;
    let scale = lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= f64::EPSILON * scale {
            break;
        }
        if sturm_count(d, e, mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace(n: usize) -> Tridiag {
        Tridiag {
            sub: vec![-1.0; n - 1],
            diag: vec![2.0; n],
            sup: vec![-1.0; n - 1],
        }
    }

    #[test]
    fn thomas_and_pivoted_agree() {
        let a = laplace(7);
        let x: Vec<f64> = (0..7).map(|i| (i as f64).sin()).collect();
        let b = a.matvec(&x);
        let y = a.solve(&b).unwrap();
        let z = a.solve_pivoted(&b, 1e-300);
        for i in 0..7 {
            assert!((y[i] - x[i]).abs() < 1e-13);
            assert!((z[i] - x[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn pivoting_handles_zero_diagonal() {
        let a = Tridiag {
            sub: vec![1.0, 2.0],
            diag: vec![0.0, 0.0, 1.0],
            sup: vec![3.0, 1.0],
        };
        let x = [1.0, -2.0, 0.5];
        let z = a.solve_pivoted(&a.matvec(&x), 1e-300);
        for i in 0..3 {
            assert!((z[i] - x[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn bisection_finds_dirichlet_spectrum() {
        let n = 20;
        let a = laplace(n);
        let b = gershgorin(&a.diag, &a.sub);
        for k in 0..n {
            let exact = 2.0 - 2.0 * (std::f64::consts::PI * (k + 1) as f64 / (n + 1) as f64).cos();
            assert!((bisect_eigenvalue(&a.diag, &a.sub, k, b) - exact).abs() < 1e-13);
        }
    }
}
