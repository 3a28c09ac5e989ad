//! Solution operators `S(t)`, `K(t)` of `∂^α(u - a) + A_0 u = g` in the
//! eigenbasis of `A_0`, and linear solvers for `∂^α(u - a) + A_0 u = Q u + F`
//! with `Q u = b(x,t) u_x + r(x,t) u`.

use crate::error::{Error, Result};
use crate::fracops::{l1_coefficient, Reconstruction, TimeGrid};
use crate::mlf::KernelTables;
use crate::spectral::{EigenBasis, Field, ModalCoeffs};
use crate::trajectory::Trajectory;
use crate::tridiag::Tridiag;
use crate::volterra::{solve_volterra, Component, VolterraOptions};
use std::sync::Arc;

pub type SpaceTimeFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone)]
enum WeightTable {
    /// `[m][mode]`: interval `[mΔ, (m+1)Δ]` in the lag variable
    Toeplitz { near: Vec<Vec<f64>>, far: Vec<Vec<f64>> },
    /// `[i][k-1][mode]`: interval `k` seen from node `i`
    Dense { near: Vec<Vec<Vec<f64>>>, far: Vec<Vec<Vec<f64>>> },
}

/// Per-mode product-integration weights of the resolvent kernel
/// `K_n(τ) = τ^{α-1} E_{α,α}(-λ_n τ^α)` on a fixed time grid.
#[derive(Debug, Clone)]
pub struct ModalPropagator {
    basis: Arc<EigenBasis>,
    alpha: f64,
    grid: TimeGrid,
    recon: Reconstruction,
    tables: KernelTables,
    /// `[i][mode]`: `E_{α,1}(-λ_n t_i^α)`
    relax: Vec<Vec<f64>>,
    weights: WeightTable,
}

impl ModalPropagator {
    /// Builds the tables; uniform grids cost `O(N M)` kernel evaluations,
    /// other grids `O(N² M)`.
    pub fn new(basis: Arc<EigenBasis>, alpha: f64, grid: TimeGrid, recon: Reconstruction) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Domain(format!("order alpha = {alpha} must lie in (0, 1)")));
        }
        let tables = KernelTables::new(alpha)?;
        let lam = &basis.lambdas;
        let relax = grid
            .nodes()
            .iter()
            .map(|&t| lam.iter().map(|&l| tables.relaxation(l, t)).collect())
            .collect();
        let n = grid.n_steps();
        let split = |t0: f64, t1: f64| -> (Vec<f64>, Vec<f64>) {
            lam.iter()
                .map(|&l| {
                    let m = tables.moments(l, t0, t1);
                    (m.near().max(0.0), m.far.max(0.0))
                })
                .unzip()
        };
        let weights = if grid.is_uniform() {
            let h = grid.step(1);
            let (near, far) = (0..n).map(|m| split(m as f64 * h, (m + 1) as f64 * h)).unzip();
            WeightTable::Toeplitz { near, far }
        } else {
            let t = grid.nodes();
            let mut near = Vec::with_capacity(n + 1);
            let mut far = Vec::with_capacity(n + 1);
            for i in 0..=n {
                let (a, b): (Vec<_>, Vec<_>) = (1..=i).map(|k| split(t[i] - t[k], t[i] - t[k - 1])).unzip();
                near.push(a);
                far.push(b);
            }
            WeightTable::Dense { near, far }
        };
        Ok(ModalPropagator { basis, alpha, grid, recon, tables, relax, weights })
    }

    pub fn basis(&self) -> &Arc<EigenBasis> {
        &self.basis
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn reconstruction(&self) -> Reconstruction {
        self.recon
    }

    pub fn n_modes(&self) -> usize {
        self.basis.n_modes()
    }

    pub fn tables(&self) -> &KernelTables {
        &self.tables
    }

    /// `E_{α,1}(-λ_n t_i^α)` for every mode.
    pub fn relaxation(&self, i: usize) -> &[f64] {
        &self.relax[i]
    }

    fn interval(&self, i: usize, k: usize) -> (&[f64], &[f64]) {
        match &self.weights {
            WeightTable::Toeplitz { near, far } => (&near[i - k], &far[i - k]),
            WeightTable::Dense { near, far } => (&near[i][k - 1], &far[i][k - 1]),
        }
    }

    /// `acc += ω(i, j) ⊙ g` for `j ≤ i`.
    pub fn accumulate(&self, i: usize, j: usize, g: &[f64], acc: &mut [f64]) {
        match self.recon {
            Reconstruction::PiecewiseLinear => {
                if j >= 1 {
                    let (near, _) = self.interval(i, j);
                    acc.iter_mut().zip(near).zip(g).for_each(|((a, w), v)| *a += w * v);
                }
                if j < i {
                    let (_, far) = self.interval(i, j + 1);
                    acc.iter_mut().zip(far).zip(g).for_each(|((a, w), v)| *a += w * v);
                }
            }
            Reconstruction::PiecewiseConstant => {
                if j < i {
                    let (near, far) = self.interval(i, j + 1);
                    acc.iter_mut()
                        .zip(near.iter().zip(far))
                        .zip(g)
                        .for_each(|((a, (p, q)), v)| *a += (p + q) * v);
                }
            }
        }
    }

    /// Weight vector `ω(i, j)` over modes.
    pub fn omega(&self, i: usize, j: usize) -> Vec<f64> {
        let mut w = vec![0.0; self.n_modes()];
        self.accumulate(i, j, &vec![1.0; self.n_modes()], &mut w);
        w
    }

    /// `S(t) a` for any `t ≥ 0`.
    pub fn apply_s(&self, t: f64, a: &[f64]) -> Result<ModalCoeffs> {
        apply_s_with(&self.tables, &self.basis, t, a)
    }

    /// `S(t_i) a` on a grid node.
    pub fn apply_s_node(&self, i: usize, a: &[f64]) -> ModalCoeffs {
        a.iter().zip(&self.relax[i]).map(|(c, e)| c * e).collect()
    }

    /// `Σ_{j≤i} ω(i, j) f_j` at every node.
    pub fn convolve_k(&self, forcing: &[ModalCoeffs]) -> Result<Vec<ModalCoeffs>> {
        if forcing.len() != self.grid.len() {
            return Err(Error::DimensionMismatch { expected: self.grid.len(), got: forcing.len() });
        }
        let m = self.n_modes();
        if let Some(bad) = forcing.iter().find(|f| f.len() != m) {
            return Err(Error::DimensionMismatch { expected: m, got: bad.len() });
        }
        Ok((0..self.grid.len())
            .map(|i| {
                let mut acc = vec![0.0; m];
                for (j, f) in forcing.iter().enumerate().take(i + 1) {
                    self.accumulate(i, j, f, &mut acc);
                }
                acc
            })
            .collect())
    }
}

fn apply_s_with(tables: &KernelTables, basis: &EigenBasis, t: f64, a: &[f64]) -> Result<ModalCoeffs> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("time t = {t} must be non-negative")));
    }
    if a.len() != basis.n_modes() {
        return Err(Error::DimensionMismatch { expected: basis.n_modes(), got: a.len() });
    }
    Ok(a.iter().zip(&basis.lambdas).map(|(c, &l)| c * tables.relaxation(l, t)).collect())
}

/// `S(t) a`: multiplies mode `n` by `E_{α,1}(-λ_n t^α)`.
pub fn apply_s(prop: &ModalPropagator, t: f64, a: &[f64]) -> Result<ModalCoeffs> {
    prop.apply_s(t, a)
}

/// Discrete `∫_0^{t_i} K(t_i - s) f(s) ds` with the propagator's reconstruction.
pub fn convolve_k(prop: &ModalPropagator, forcing: &[ModalCoeffs]) -> Result<Vec<ModalCoeffs>> {
    prop.convolve_k(forcing)
}

/// `∂^α(u - a) + A_0 u = b u_x + r u + F`.
#[derive(Clone)]
pub struct LinearProblem {
    pub prop: Arc<ModalPropagator>,
    pub initial: Field,
    pub drift: Option<SpaceTimeFn>,
    pub reaction: Option<SpaceTimeFn>,
    pub forcing: Option<SpaceTimeFn>,
}

impl std::fmt::Debug for LinearProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LinearProblem")
            .field("alpha", &self.prop.alpha())
            .field("drift", &self.drift.is_some())
            .field("reaction", &self.reaction.is_some())
            .field("forcing", &self.forcing.is_some())
            .finish_non_exhaustive()
    }
}

/// Coefficients of a linear problem sampled at every time node.
struct Sampled {
    drift: Option<Vec<Field>>,
    reaction: Option<Vec<Field>>,
    forcing: Option<Vec<Field>>,
}

impl LinearProblem {
    pub fn new(prop: Arc<ModalPropagator>, initial: Field) -> Result<Self> {
        if initial.len() != prop.basis().n_nodes() {
            return Err(Error::DimensionMismatch { expected: prop.basis().n_nodes(), got: initial.len() });
        }
        Ok(LinearProblem { prop, initial, drift: None, reaction: None, forcing: None })
    }

    pub fn with_drift(mut self, b: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.drift = Some(Arc::new(b));
        self
    }

    pub fn with_reaction(mut self, r: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.reaction = Some(Arc::new(r));
        self
    }

    pub fn with_forcing(mut self, f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.forcing = Some(Arc::new(f));
        self
    }

    fn sample(&self) -> Sampled {
        let x = self.prop.basis().grid();
        let t = self.prop.grid().nodes();
        let on_grid = |f: &SpaceTimeFn| -> Vec<Field> {
            t.iter().map(|&ti| x.iter().map(|&xi| f(xi, ti)).collect()).collect()
        };
        Sampled {
            drift: self.drift.as_ref().map(on_grid),
            reaction: self.reaction.as_ref().map(on_grid),
            forcing: self.forcing.as_ref().map(on_grid),
        }
    }
}

impl Sampled {
    fn rhs(&self, basis: &EigenBasis, i: usize, u: &[f64]) -> Field {
        let mut g = match &self.forcing {
            Some(f) => f[i].clone(),
            None => vec![0.0; u.len()],
        };
        if let Some(r) = &self.reaction {
            g.iter_mut().zip(&r[i]).zip(u).for_each(|((a, c), v)| *a += c * v);
        }
        if let Some(b) = &self.drift {
            let ux = basis.disc.gradient(u);
            g.iter_mut().zip(&b[i]).zip(&ux).for_each(|((a, c), v)| *a += c * v);
        }
        g
    }

    /// Tridiagonal matrix of `Q(t_i)`.
    fn q_matrix(&self, basis: &EigenBasis, i: usize) -> Tridiag {
        let n = basis.n_nodes();
        let mut m = match &self.drift {
            Some(b) => basis.disc.gradient_matrix(&b[i]),
            None => Tridiag { sub: vec![0.0; n - 1], diag: vec![0.0; n], sup: vec![0.0; n - 1] },
        };
        if let Some(r) = &self.reaction {
            m.diag.iter_mut().zip(&r[i]).for_each(|(d, c)| *d += c);
        }
        m
    }
}

/// Mild solution `u = S a + K * (Q u + F)` marched node by node; the implicit
/// current-node term is resolved by fixed-point iteration to `1e-12`.
pub fn solve_linear(prob: &LinearProblem) -> Result<Trajectory> {
    let prop = &prob.prop;
    let basis = prop.basis().clone();
    let sampled = prob.sample();
    let comps = [Component { prop: prop.clone(), initial: prob.initial.clone() }];
    let opts = VolterraOptions::marching();
    let sol = solve_volterra(&comps, &opts, &mut |i: usize, u: &[Field]| {
        Ok(vec![sampled.rhs(&basis, i, &u[0])])
    })?;
    let mut traj = Trajectory::new(
        prop.grid().clone(),
        basis.grid().to_vec(),
        sol.fields.into_iter().next().expect("one component"),
        "spectral-volterra",
    );
    traj.meta.iterations = sol.report.inner_iterations;
    traj.meta.residual = sol.report.max_residual;
    Ok(traj)
}

/// Independent oracle: implicit L1 stepping on the same spatial operator.
pub fn solve_linear_l1(prob: &LinearProblem) -> Result<Trajectory> {
    let prop = &prob.prop;
    let basis = prop.basis();
    let disc = &basis.disc;
    let grid = prop.grid();
    let alpha = prop.alpha();
    let sampled = prob.sample();
    let n = grid.len();
    let nodes = basis.n_nodes();
    let mut states: Vec<Field> = Vec::with_capacity(n);
    states.push(prob.initial.clone());
    for i in 1..n {
        let bii = l1_coefficient(alpha, grid, i, i);
        let mut rhs = match &sampled.forcing {
            Some(f) => f[i].clone(),
            None => vec![0.0; nodes],
        };
        for (r, u) in rhs.iter_mut().zip(&states[i - 1]) {
            *r += bii * u;
        }
        for j in 1..i {
            let b = l1_coefficient(alpha, grid, i, j);
            for ((r, p), q) in rhs.iter_mut().zip(&states[j]).zip(&states[j - 1]) {
                *r -= b * (p - q);
            }
        }
        let mut mat = disc.unshifted_matrix_plus(&vec![disc.c0 + bii; nodes]);
        let q = sampled.q_matrix(basis, i);
        for k in 0..nodes {
            mat.diag[k] -= q.diag[k];
            if k + 1 < nodes {
                mat.sub[k] -= q.sub[k];
                mat.sup[k] -= q.sup[k];
            }
        }
        let u = mat.solve(&rhs).map_err(|e| e.context(format!("L1 step {i}")))?;
        states.push(u);
    }
    Ok(Trajectory::new(grid.clone(), basis.grid().to_vec(), states, "l1-implicit"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlf::{ml, MlParams};
    use crate::spectral::{eigendecompose, EllipticOperator};

    fn setup(alpha: f64, n_grid: usize, n_modes: usize, steps: usize) -> Arc<ModalPropagator> {
        let op = EllipticOperator::laplacian(std::f64::consts::PI).with_shift(1.0);
        let basis = Arc::new(eigendecompose(&op, n_modes, n_grid).unwrap());
        let grid = TimeGrid::uniform(1.0, steps).unwrap();
        Arc::new(ModalPropagator::new(basis, alpha, grid, Reconstruction::PiecewiseLinear).unwrap())
    }

    #[test]
    fn s_is_identity_at_zero_and_decays_per_mode() {
        let p = setup(0.5, 32, 5, 8);
        let a = vec![1.0, 0.0, 0.0, 2.0, 0.0];
        assert_eq!(p.apply_s(0.0, &a).unwrap(), a);
        let s = p.apply_s(1.0, &[1.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let want = ml(MlParams::new(0.5, 1.0).unwrap(), -p.basis().lambdas[0]).unwrap();
        assert!((s[0] - want).abs() < 1e-13);
        assert!(p.apply_s(-1.0, &a).is_err());
    }

    #[test]
    fn weight_sums_match_closed_form() {
        let p = setup(0.4, 32, 33, 50);
        for i in [1usize, 7, 50] {
            let t = p.grid().t(i);
            let mut sum = vec![0.0; p.n_modes()];
            for j in 0..=i {
                p.accumulate(i, j, &vec![1.0; p.n_modes()], &mut sum);
            }
            for (n, &l) in p.basis().lambdas.iter().enumerate() {
                let e = ml(MlParams::new(0.4, 1.0).unwrap(), -l * t.powf(0.4)).unwrap();
                assert!((sum[n] - (1.0 - e) / l).abs() < 1e-10, "i={i} n={n}");
            }
        }
        let forcing = vec![vec![0.0; p.n_modes()]; 51];
        assert!(p.convolve_k(&forcing).unwrap().iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn homogeneous_solution_is_relaxation() {
        let p = setup(0.7, 24, 25, 32);
        let basis = p.basis().clone();
        let a: Field = basis.grid().iter().map(|x| 1.0 + x.cos()).collect();
        let traj = solve_linear(&LinearProblem::new(p.clone(), a.clone()).unwrap()).unwrap();
        let a_hat = basis.project(&a).unwrap();
        for i in 0..p.grid().len() {
            let want = basis.synthesize(&p.apply_s_node(i, &a_hat)).unwrap();
            for (u, w) in traj.states[i].iter().zip(&want) {
                assert!((u - w).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn l1_keeps_an_equilibrium() {
        let p = setup(0.5, 20, 21, 16);
        let basis = p.basis().clone();
        let u: Field = basis.grid().iter().map(|x| 2.0 + x.cos()).collect();
        let f = basis.disc.apply(&u);
        let xs = basis.grid().to_vec();
        let prob = LinearProblem::new(p.clone(), u.clone())
            .unwrap()
            .with_forcing(move |x, _| {
                let k = xs.iter().position(|&y| (y - x).abs() < 1e-12).unwrap();
                f[k]
            });
        let traj = solve_linear_l1(&prob).unwrap();
        for s in &traj.states {
            for (a, b) in s.iter().zip(&u) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
