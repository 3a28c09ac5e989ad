//! Shifted elliptic operator `A_0 v = -(p v')' - c v + c0 v` on `(0, L)` with
//! Robin/Neumann conditions `p ∂_ν v + σ v = 0`, discretized by half-cell finite
//! volumes, and its eigen-decomposition.

use crate::error::{Error, Result};
use crate::tridiag::{bisect_eigenvalue, gershgorin, Tridiag};
use std::fmt;
use std::sync::Arc;

/// Spatial function sampled on the grid nodes.
pub type Field = Vec<f64>;
/// Coefficients `(v, φ_n)` in an eigenbasis.
pub type ModalCoeffs = Vec<f64>;

pub type Coefficient = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct EllipticOperator {
    pub length: f64,
    pub p: Coefficient,
    pub c: Coefficient,
    pub sigma_left: f64,
    pub sigma_right: f64,
    /// `None` selects [`EllipticOperator::default_shift`].
    pub c0: Option<f64>,
}

impl fmt::Debug for EllipticOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EllipticOperator")
            .field("length", &self.length)
            .field("sigma_left", &self.sigma_left)
            .field("sigma_right", &self.sigma_right)
            .field("c0", &self.c0)
            .finish_non_exhaustive()
    }
}

impl EllipticOperator {
    /// `-v''` with Neumann ends and the default shift.
    pub fn laplacian(length: f64) -> Self {
        EllipticOperator {
            length,
            p: Arc::new(|_| 1.0),
            c: Arc::new(|_| 0.0),
            sigma_left: 0.0,
            sigma_right: 0.0,
            c0: None,
        }
    }

    pub fn with_p(mut self, p: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.p = Arc::new(p);
        self
    }

    pub fn with_c(mut self, c: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.c = Arc::new(c);
        self
    }

    pub fn with_robin(mut self, sigma_left: f64, sigma_right: f64) -> Self {
        self.sigma_left = sigma_left;
        self.sigma_right = sigma_right;
        self
    }

    pub fn with_shift(mut self, c0: f64) -> Self {
        self.c0 = Some(c0);
        self
    }

    /// `1 + max(0, -min c) + max σ`, with `min c` sampled on the grid.
    pub fn default_shift(&self, n_grid: usize) -> f64 {
        let h = self.length / n_grid as f64;
        let min_c = (0..=n_grid).map(|i| (self.c)(i as f64 * h)).fold(f64::INFINITY, f64::min);
        1.0 + (-min_c).max(0.0) + self.sigma_left.max(self.sigma_right)
    }

    pub fn discretize(&self, n_grid: usize) -> Result<Discretization> {
        if n_grid < 2 {
            return Err(Error::Domain("need at least two spatial intervals".into()));
        }
        if !(self.length > 0.0) {
            return Err(Error::Domain(format!("interval length {} must be positive", self.length)));
        }
        if self.sigma_left < 0.0 || self.sigma_right < 0.0 {
            return Err(Error::Domain("Robin coefficients must be non-negative".into()));
        }
        let c0 = self.c0.unwrap_or_else(|| self.default_shift(n_grid));
        let n = n_grid + 1;
        let h = self.length / n_grid as f64;
        let x: Vec<f64> = (0..n).map(|i| i as f64 * h).collect();
        let mut weights = vec![h; n];
        weights[0] = 0.5 * h;
        weights[n - 1] = 0.5 * h;
        let flux: Vec<f64> = (0..n_grid).map(|i| (self.p)((i as f64 + 0.5) * h)).collect();
        if let Some(bad) = flux.iter().position(|v| !(*v > 0.0)) {
            return Err(Error::Domain(format!(
                "diffusion coefficient p must be positive; p({}) = {}",
                (bad as f64 + 0.5) * h,
                flux[bad]
            )));
        }
        let c: Vec<f64> = x.iter().map(|&xi| (self.c)(xi)).collect();
        let mut diag = vec![0.0; n];
        for i in 0..n {
            let left = if i > 0 { flux[i - 1] } else { 0.0 };
            let right = if i < n_grid { flux[i] } else { 0.0 };
            diag[i] = (left + right) / h - weights[i] * c[i];
        }
        diag[0] += self.sigma_left;
        diag[n - 1] += self.sigma_right;
        let off: Vec<f64> = flux.iter().map(|f| -f / h).collect();
        Ok(Discretization {
            h,
            x,
            weights,
            stiffness: Tridiag {
                sub: off.clone(),
                diag,
                sup: off,
            },
            c0,
            p_ends: ((self.p)(0.0), (self.p)(self.length)),
            sigma: (self.sigma_left, self.sigma_right),
        })
    }
}

/// Discrete operator: `W A_h = S + c0 W` with `S` symmetric tridiagonal and
/// `W` the trapezoid weights. `A_h - c0` is the unshifted operator `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct Discretization {
    pub h: f64,
    pub x: Vec<f64>,
    pub weights: Vec<f64>,
    /// weighted form of `A = A_0 - c0`
    pub stiffness: Tridiag,
    pub c0: f64,
    /// `p(0)`, `p(L)`
    pub p_ends: (f64, f64),
    pub sigma: (f64, f64),
}

impl Discretization {
    pub fn n_nodes(&self) -> usize {
        self.x.len()
    }

    /// `A v` without the shift.
    pub fn apply_unshifted(&self, v: &[f64]) -> Field {
        let mut y = self.stiffness.matvec(v);
        for (yi, w) in y.iter_mut().zip(&self.weights) {
            *yi /= w;
        }
        y
    }

    /// `A_0 v`
    pub fn apply(&self, v: &[f64]) -> Field {
        let mut y = self.apply_unshifted(v);
        for (yi, vi) in y.iter_mut().zip(v) {
            *yi += self.c0 * vi;
        }
        y
    }

    /// Row-scaled tridiagonal matrix of `A + diag(shift)` (unsymmetric form).
    pub fn unshifted_matrix_plus(&self, shift: &[f64]) -> Tridiag {
        let n = self.n_nodes();
        let s = &self.stiffness;
        let w = &self.weights;
        Tridiag {
            sub: (0..n - 1).map(|i| s.sub[i] / w[i + 1]).collect(),
            diag: (0..n).map(|i| s.diag[i] / w[i] + shift[i]).collect(),
            sup: (0..n - 1).map(|i| s.sup[i] / w[i]).collect(),
        }
    }

    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        self.weights.iter().zip(u).zip(v).map(|((w, a), b)| w * a * b).sum()
    }

    pub fn norm(&self, u: &[f64]) -> f64 {
        self.inner(u, u).sqrt()
    }

    /// Centered first derivative; boundary values come from the Robin condition.
    pub fn gradient(&self, u: &[f64]) -> Field {
        let n = u.len();
        let mut g = vec![0.0; n];
        for i in 1..n - 1 {
            g[i] = (u[i + 1] - u[i - 1]) / (2.0 * self.h);
        }
        g[0] = self.sigma.0 * u[0] / self.p_ends.0;
        g[n - 1] = -self.sigma.1 * u[n - 1] / self.p_ends.1;
        g
    }

    /// Tridiagonal matrix of `v ↦ b ⊙ gradient(v)`.
    pub fn gradient_matrix(&self, b: &[f64]) -> Tridiag {
        let n = self.n_nodes();
        let mut m = Tridiag { sub: vec![0.0; n - 1], diag: vec![0.0; n], sup: vec![0.0; n - 1] };
        for i in 1..n - 1 {
            m.sub[i - 1] = -b[i] / (2.0 * self.h);
            m.sup[i] = b[i] / (2.0 * self.h);
        }
        m.diag[0] = b[0] * self.sigma.0 / self.p_ends.0;
        m.diag[n - 1] = -b[n - 1] * self.sigma.1 / self.p_ends.1;
        m
    }
}

/// Eigenpairs of the discrete `A_0`, orthonormal in the weighted inner product.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenBasis {
    pub lambdas: Vec<f64>,
    /// `modes[n][i] = φ_n(x_i)`
    pub modes: Vec<Vec<f64>>,
    pub disc: Discretization,
}

/// Relative size below which a computed `λ_1` is treated as zero.
const ZERO_EIGEN_TOL: f64 = 64.0 * f64::EPSILON;

/// First `n_modes` eigenpairs of the discrete operator on `n_grid` intervals.
pub fn eigendecompose(op: &EllipticOperator, n_modes: usize, n_grid: usize) -> Result<EigenBasis> {
    let disc = op.discretize(n_grid)?;
    basis_from_discretization(disc, n_modes)
}

pub fn basis_from_discretization(disc: Discretization, n_modes: usize) -> Result<EigenBasis> {
    let n = disc.n_nodes();
    if n_modes == 0 || n_modes > n {
        return Err(Error::Domain(format!(
            "n_modes = {n_modes} must lie in 1..={n} for {} intervals",
            n - 1
        )));
    }
    let rw: Vec<f64> = disc.weights.iter().map(|w| 1.0 / w.sqrt()).collect();
    let s = &disc.stiffness;
    let d: Vec<f64> = (0..n).map(|i| s.diag[i] * rw[i] * rw[i] + disc.c0).collect();
    let e: Vec<f64> = (0..n - 1).map(|i| s.sup[i] * rw[i] * rw[i + 1]).collect();
    let bounds = gershgorin(&d, &e);
    let scale = bounds.0.abs().max(bounds.1.abs());

    let mut lambdas = Vec::with_capacity(n_modes);
    let mut vecs: Vec<Vec<f64>> = Vec::with_capacity(n_modes);
    for k in 0..n_modes {
        let lam = bisect_eigenvalue(&d, &e, k, bounds);
        let psi = inverse_iteration(&d, &e, lam, scale, &vecs, &lambdas);
        lambdas.push(lam);
        vecs.push(psi);
    }
    let tol = ZERO_EIGEN_TOL * scale;
    if lambdas[0] < -tol {
        return Err(Error::NonPositiveSpectrum { lambda1: lambdas[0] });
    }
    if lambdas[0] < tol {
        lambdas[0] = 0.0;
    }
    let modes = vecs
        .into_iter()
        .map(|psi| {
            let mut phi: Vec<f64> = psi.iter().zip(&rw).map(|(a, b)| a * b).collect();
            if phi[0] < 0.0 {
                phi.iter_mut().for_each(|v| *v = -*v);
            }
            phi
        })
        .collect();
    Ok(EigenBasis { lambdas, modes, disc })
}

fn inverse_iteration(
    d: &[f64],
    e: &[f64],
    lam: f64,
    scale: f64,
    previous: &[Vec<f64>],
    prev_lambdas: &[f64],
) -> Vec<f64> {
    let n = d.len();
    let shifted = Tridiag {
        sub: e.to_vec(),
        diag: d.iter().map(|v| v - lam).collect(),
        sup: e.to_vec(),
    };
    let tiny = f64::EPSILON * scale.max(1.0);
    let mut y: Vec<f64> = (0..n).map(|i| 1.0 + 0.37 * ((i as f64) * 0.731).sin()).collect();
    for _ in 0..4 {
        y = shifted.solve_pivoted(&y, tiny);
        // keep clustered eigenvectors orthogonal
        for (v, &l) in previous.iter().zip(prev_lambdas) {
            if (l - lam).abs() <= 1e-8 * scale {
                let dot: f64 = v.iter().zip(&y).map(|(a, b)| a * b).sum();
                y.iter_mut().zip(v).for_each(|(a, b)| *a -= dot * b);
            }
        }
        let nrm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        y.iter_mut().for_each(|v| *v /= nrm);
    }
    y
}

impl EigenBasis {
    pub fn n_modes(&self) -> usize {
        self.lambdas.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.disc.n_nodes()
    }

    pub fn grid(&self) -> &[f64] {
        &self.disc.x
    }

    pub fn weights(&self) -> &[f64] {
        &self.disc.weights
    }

    /// Same modes with every eigenvalue (and the shift `c0`) raised by `delta`.
    pub fn shifted(&self, delta: f64) -> Result<EigenBasis> {
        let mut b = self.clone();
        b.lambdas.iter_mut().for_each(|l| *l += delta);
        b.disc.c0 += delta;
        if b.lambdas[0] < -ZERO_EIGEN_TOL * b.lambdas.last().unwrap().abs().max(1.0) {
            return Err(Error::NonPositiveSpectrum { lambda1: b.lambdas[0] });
        }
        b.lambdas[0] = b.lambdas[0].max(0.0);
        Ok(b)
    }

    pub fn project(&self, field: &[f64]) -> Result<ModalCoeffs> {
        if field.len() != self.n_nodes() {
            return Err(Error::DimensionMismatch { expected: self.n_nodes(), got: field.len() });
        }
        Ok(self.modes.iter().map(|phi| self.disc.inner(phi, field)).collect())
    }

    pub fn synthesize(&self, coeffs: &[f64]) -> Result<Field> {
        if coeffs.len() != self.n_modes() {
            return Err(Error::DimensionMismatch { expected: self.n_modes(), got: coeffs.len() });
        }
        let mut f = vec![0.0; self.n_nodes()];
        for (phi, &c) in self.modes.iter().zip(coeffs) {
            if c != 0.0 {
                f.iter_mut().zip(phi).for_each(|(a, b)| *a += c * b);
            }
        }
        Ok(f)
    }

    /// Weighted norm of the part of `field` outside the span of the modes.
    pub fn tail_energy(&self, field: &[f64]) -> Result<f64> {
        let back = self.synthesize(&self.project(field)?)?;
        let diff: Vec<f64> = field.iter().zip(&back).map(|(a, b)| a - b).collect();
        Ok(self.disc.norm(&diff))
    }

    /// CSV rows `n,lambda_n` with 1-based `n`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,lambda\n");
        for (i, l) in self.lambdas.iter().enumerate() {
            s.push_str(&format!("{},{:.17e}\n", i + 1, l));
        }
        s
    }

    /// Mode matrix dump: one row per node, `x, φ_1, …, φ_M`.
    pub fn modes_csv(&self) -> String {
        let mut s = String::from("x");
        for n in 1..=self.n_modes() {
            s.push_str(&format!(",phi_{n}"));
        }
        s.push('\n');
        for (i, x) in self.grid().iter().enumerate() {
            s.push_str(&format!("{x:.17e}"));
            for phi in &self.modes {
                s.push_str(&format!(",{:.17e}", phi[i]));
            }
            s.push('\n');
        }
        s
    }
}

/// Multiplies each coefficient by `λ_n^γ`.
pub fn apply_fractional_power(basis: &EigenBasis, gamma: f64, coeffs: &[f64]) -> Result<ModalCoeffs> {
    if coeffs.len() != basis.n_modes() {
        return Err(Error::DimensionMismatch { expected: basis.n_modes(), got: coeffs.len() });
    }
    if !(gamma >= 0.0) {
        return Err(Error::Domain(format!("gamma = {gamma} must be non-negative")));
    }
    Ok(coeffs
        .iter()
        .zip(&basis.lambdas)
        .map(|(c, l)| if gamma == 0.0 { *c } else { c * l.powf(gamma) })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn neumann_spectrum_on_zero_pi() {
        let op = EllipticOperator::laplacian(PI).with_shift(0.0);
        let b = eigendecompose(&op, 6, 400).unwrap();
        for (n, l) in b.lambdas.iter().enumerate() {
            let exact = (n * n) as f64;
            assert!((l - exact).abs() < 2e-3 * (1.0 + exact), "{n}: {l}");
        }
        assert_eq!(b.lambdas[0], 0.0);
        let phi1 = &b.modes[0];
        assert!(phi1.iter().all(|v| (v - 1.0 / PI.sqrt()).abs() < 1e-10));
        let op = EllipticOperator::laplacian(PI).with_shift(1.0);
        let b1 = eigendecompose(&op, 3, 400).unwrap();
        assert!((b1.lambdas[1] - b.lambdas[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn orthonormal_and_round_trip() {
        let op = EllipticOperator::laplacian(1.0)
            .with_p(|x| 1.0 + 0.5 * x)
            .with_c(|x| -x)
            .with_robin(0.5, 2.0);
        let b = eigendecompose(&op, 41, 40).unwrap();
        for i in 0..b.n_modes() {
            for j in 0..b.n_modes() {
                let g = b.disc.inner(&b.modes[i], &b.modes[j]);
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g - want).abs() < 1e-10, "({i},{j}) {g}");
            }
        }
        let f: Vec<f64> = b.grid().iter().map(|x| (3.0 * x).sin() + x * x).collect();
        let back = b.synthesize(&b.project(&f).unwrap()).unwrap();
        for (a, c) in f.iter().zip(&back) {
            assert!((a - c).abs() < 1e-10);
        }
        assert!(b.modes[0].iter().all(|v| *v > 0.0));
    }

    #[test]
    fn discrete_operator_is_self_adjoint() {
        let op = EllipticOperator::laplacian(2.0).with_p(|x| 2.0 + x.sin()).with_robin(1.0, 0.0);
        let d = op.discretize(30).unwrap();
        let u: Vec<f64> = d.x.iter().map(|x| x.cos()).collect();
        let v: Vec<f64> = d.x.iter().map(|x| x * x - 1.0).collect();
        assert!((d.inner(&d.apply(&u), &v) - d.inner(&u, &d.apply(&v))).abs() < 1e-10);
    }

    #[test]
    fn rejects_bad_input() {
        let op = EllipticOperator::laplacian(1.0).with_shift(-1.0);
        assert!(matches!(eigendecompose(&op, 2, 20), Err(Error::NonPositiveSpectrum { .. })));
        let op = EllipticOperator::laplacian(1.0);
        assert!(eigendecompose(&op, 22, 20).is_err());
        let b = eigendecompose(&op, 3, 20).unwrap();
        assert!(b.project(&[1.0; 3]).is_err());
        assert!(apply_fractional_power(&b, 1.0, &[1.0]).is_err());
        assert!(EllipticOperator::laplacian(1.0).with_p(|_| -1.0).discretize(4).is_err());
    }
}
