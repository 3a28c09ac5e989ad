//! Multi-order linear systems `∂^{α_ℓ}(u_ℓ - a_ℓ) = Δu_ℓ + Σ_j p_{ℓj} u_j + F_ℓ`
//! with Neumann ends, and two-component semilinear systems
//! `∂^α(u - a) = Δu + f(u, v)`, `∂^α(v - b) = Δv + g(u, v)`.

use crate::error::{Error, Result};
use crate::fracops::{rl_integral_values, Reconstruction, TimeGrid};
use crate::l1::{l1_march, L1Component};
use crate::linsolve::ModalPropagator;
use crate::semilinear::Verdict;
use crate::special::{gamma, ln_gamma_abs};
use crate::spectral::{basis_from_discretization, EigenBasis, EllipticOperator, Field};
use crate::trajectory::Trajectory;
use crate::volterra::{solve_volterra, Component, VolterraOptions, VolterraReport, Window};
use std::fmt;
use std::sync::Arc;

/// `p(ℓ, j, x, t)`: coefficient of `u_j` in equation `ℓ`.
pub type CouplingFn = Arc<dyn Fn(usize, usize, f64, f64) -> f64 + Send + Sync>;
/// `F(ℓ, x, t)`
pub type SystemForcingFn = Arc<dyn Fn(usize, f64, f64) -> f64 + Send + Sync>;
/// `f(ξ, η)`
pub type PairFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct MultiOrderSystem {
    pub alphas: Vec<f64>,
    pub length: f64,
    pub n_grid: usize,
    pub grid: TimeGrid,
    pub coupling: CouplingFn,
    pub forcing: Option<SystemForcingFn>,
    pub initials: Vec<Field>,
    pub x: Vec<f64>,
}

impl fmt::Debug for MultiOrderSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MultiOrderSystem")
            .field("alphas", &self.alphas)
            .field("length", &self.length)
            .field("n_grid", &self.n_grid)
            .field("n_steps", &self.grid.n_steps())
            .finish_non_exhaustive()
    }
}

impl MultiOrderSystem {
    /// Uncoupled, unforced system with zero initial values. Orders must be
    /// non-decreasing in `(0, 1)`; equal orders are accepted.
    pub fn new(alphas: Vec<f64>, length: f64, n_grid: usize, grid: TimeGrid) -> Result<Self> {
        if alphas.len() < 2 {
            return Err(Error::Domain("a system needs at least two components".into()));
        }
        if let Some(a) = alphas.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
            return Err(Error::Domain(format!("order {a} must lie in (0, 1)")));
        }
        if alphas.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Domain("orders must be sorted ascending".into()));
        }
        let disc = EllipticOperator::laplacian(length).discretize(n_grid)?;
        let x = disc.x;
        Ok(MultiOrderSystem {
            initials: vec![vec![0.0; x.len()]; alphas.len()],
            alphas,
            length,
            n_grid,
            grid,
            coupling: Arc::new(|_, _, _, _| 0.0),
            forcing: None,
            x,
        })
    }

    pub fn n_components(&self) -> usize {
        self.alphas.len()
    }

    pub fn with_coupling(mut self, p: impl Fn(usize, usize, f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.coupling = Arc::new(p);
        self
    }

    pub fn with_forcing(mut self, f: impl Fn(usize, f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.forcing = Some(Arc::new(f));
        self
    }

    pub fn with_initial(mut self, a: impl Fn(usize, f64) -> f64) -> Self {
        self.initials = (0..self.n_components()).map(|l| self.x.iter().map(|&x| a(l, x)).collect()).collect();
        self
    }

    /// `[i][ℓ][j]`: coupling at every node.
    fn sample_coupling(&self) -> Vec<Vec<Vec<Field>>> {
        let n = self.n_components();
        self.grid
            .nodes()
            .iter()
            .map(|&t| {
                (0..n)
                    .map(|l| (0..n).map(|j| self.x.iter().map(|&x| (self.coupling)(l, j, x, t)).collect()).collect())
                    .collect()
            })
            .collect()
    }

    fn sample_forcing(&self, i: usize, l: usize) -> Option<Field> {
        let t = self.grid.t(i);
        self.forcing.as_ref().map(|f| self.x.iter().map(|&x| f(l, x, t)).collect())
    }

    /// `max_j sup |p_jj|` over the sampled grid.
    pub fn diagonal_sup(&self) -> f64 {
        let n = self.n_components();
        let mut s: f64 = 0.0;
        for &t in self.grid.nodes() {
            for l in 0..n {
                for &x in &self.x {
                    s = s.max((self.coupling)(l, l, x, t).abs());
                }
            }
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct SystemSolution {
    pub trajectories: Vec<Trajectory>,
    /// `U_n(t_i) = Σ_j ‖u_j^{n+1}(t_i) - u_j^n(t_i)‖`, indexed `[n][i]`
    pub increments: Vec<Vec<f64>>,
    /// constant of the recursion `U_n ≤ C J^{α_1} U_{n-1}`
    pub c_bound: f64,
    pub m1: f64,
    pub report: VolterraReport,
}

impl SystemSolution {
    /// `sup_t U_{n+1} / sup_t U_n`, over sweeps whose increments stay above
    /// the rounding floor `1e-12 Σ_ℓ sup |u_ℓ|`.
    pub fn increment_ratios(&self) -> Vec<f64> {
        let floor = 1e-12 * self.scale();
        let sup: Vec<f64> = self
            .increments
            .iter()
            .map(|u| u.iter().copied().fold(0.0, f64::max))
            .take_while(|u| *u > floor)
            .collect();
        sup.windows(2).map(|w| w[1] / w[0]).collect()
    }

    /// `Σ_ℓ sup |u_ℓ|`, at least 1
    pub fn scale(&self) -> f64 {
        self.trajectories.iter().map(|t| t.min().abs().max(t.max().abs())).sum::<f64>().max(1.0)
    }

    pub fn min_value(&self) -> f64 {
        self.trajectories.iter().map(|t| t.min()).fold(f64::INFINITY, f64::min)
    }
}

/// Builds one propagator per order on the Neumann basis of `-Δ + M_1`.
fn propagators(sys: &MultiOrderSystem, m1: f64) -> Result<(Arc<EigenBasis>, Vec<Arc<ModalPropagator>>)> {
    let op = EllipticOperator::laplacian(sys.length).with_shift(m1);
    let disc = op.discretize(sys.n_grid)?;
    let n = disc.n_nodes();
    let basis = Arc::new(basis_from_discretization(disc, n)?);
    let mut props: Vec<Arc<ModalPropagator>> = Vec::new();
    for &a in &sys.alphas {
        if let Some(p) = props.iter().find(|p| p.alpha() == a) {
            props.push(p.clone());
        } else {
            props.push(Arc::new(ModalPropagator::new(basis.clone(), a, sys.grid.clone(), Reconstruction::PiecewiseLinear)?));
        }
    }
    Ok((basis, props))
}

/// Sweeps stop once the relative increment is below this.
pub const SYSTEM_TOL: f64 = 1e-14;

/// Picard iteration of the existence proof over the whole interval, starting
/// from `U^0 = (a_1, …, a_N)`. `m1` defaults to `1 + max_j sup |p_jj|`.
pub fn picard_system_solve(sys: &MultiOrderSystem, m1: Option<f64>) -> Result<SystemSolution> {
    let n = sys.n_components();
    let m1 = m1.unwrap_or_else(|| 1.0 + sys.diagonal_sup());
    let p = sys.sample_coupling();
    for (i, pi) in p.iter().enumerate() {
        for (l, row) in pi.iter().enumerate() {
            if let Some(k) = row[l].iter().position(|v| !(v + m1 > 0.0)) {
                return Err(Error::Precondition(format!(
                    "p_{l}{l} + M_1 <= 0 at x = {}, t = {}",
                    sys.x[k],
                    sys.grid.t(i)
                )));
            }
        }
    }
    // column sums of sup |p̃_{ℓj}| over ℓ
    let mut col = vec![0.0f64; n];
    for j in 0..n {
        for l in 0..n {
            let shift = if j == l { m1 } else { 0.0 };
            let s = p.iter().flat_map(|pi| pi[l][j].iter()).fold(0.0f64, |m, v| m.max((v + shift).abs()));
            col[j] += s;
        }
    }
    let t_end = sys.grid.final_time();
    let a1 = sys.alphas[0];
    let order = sys
        .alphas
        .iter()
        .map(|&a| t_end.powf(a - a1) * gamma(a1) / gamma(a))
        .fold(0.0f64, f64::max);
    let c_bound = col.iter().copied().fold(0.0, f64::max) * order;
    let (_, props) = propagators(sys, m1)?;
    let comps: Vec<Component> =
        props.iter().zip(&sys.initials).map(|(p, a)| Component { prop: p.clone(), initial: a.clone() }).collect();
    let forcing: Vec<Vec<Option<Field>>> =
        (0..sys.grid.len()).map(|i| (0..n).map(|l| sys.sample_forcing(i, l)).collect()).collect();
    let opts = VolterraOptions {
        window: Window::Global,
        tol: SYSTEM_TOL,
        max_sweeps: 200,
        record_node_increments: true,
        growth_allowance: bound_peak(c_bound, t_end, a1),
        ..Default::default()
    };
    let sol = solve_volterra(&comps, &opts, &mut |i: usize, u: &[Field]| {
        Ok((0..n)
            .map(|l| {
                let mut g = forcing[i][l].clone().unwrap_or_else(|| vec![0.0; u[l].len()]);
                for (j, uj) in u.iter().enumerate() {
                    let shift = if j == l { m1 } else { 0.0 };
                    g.iter_mut().zip(&p[i][l][j]).zip(uj).for_each(|((g, c), v)| *g += (c + shift) * v);
                }
                g
            })
            .collect())
    })?;
    let increments = sol.report.node_increments.clone();
    let trajectories = sol
        .fields
        .into_iter()
        .enumerate()
        .map(|(l, states)| {
            let mut t = Trajectory::new(sys.grid.clone(), sys.x.clone(), states, &format!("picard-system[{l}]"));
            t.meta.iterations = sol.report.sweeps;
            t.meta.residual = sol.report.max_residual;
            t
        })
        .collect();
    Ok(SystemSolution { trajectories, increments, c_bound, m1, report: sol.report })
}

/// First sweep after which `C^n T^{nα} / Γ(nα + 1)` decreases; increments may
/// grow until then without signalling divergence.
fn bound_peak(c: f64, t_end: f64, alpha: f64) -> usize {
    let k = c * t_end.powf(alpha);
    (0..10_000)
        .find(|&n| {
            let n = n as f64;
            k * (ln_gamma_abs(n * alpha + 1.0) - ln_gamma_abs((n + 1.0) * alpha + 1.0)).exp() < 1.0
        })
        .unwrap_or(10_000)
}

/// Worst ratio `U_n(t_i) / (C J^{α_1} U_{n-1})(t_i)` over all sweeps and nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecursionCheck {
    pub worst_ratio: f64,
    pub holds: bool,
}

pub fn increment_recursion_check(sys: &MultiOrderSystem, sol: &SystemSolution) -> Result<RecursionCheck> {
    let a1 = sys.alphas[0];
    let scale = sol.scale();
    let mut worst: f64 = 0.0;
    let mut holds = true;
    for w in sol.increments.windows(2) {
        let j = rl_integral_values(a1, &sys.grid, &w[0], Reconstruction::PiecewiseLinear);
        let floor = 1e-13 * scale;
        for (u, b) in w[1].iter().zip(&j) {
            let bound = sol.c_bound * b;
            if bound > 0.0 {
                worst = worst.max(u / bound);
            }
            if *u > bound * (1.0 + 1e-9) + floor {
                holds = false;
            }
        }
    }
    Ok(RecursionCheck { worst_ratio: worst, holds })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NonnegReport {
    pub min_value: f64,
    pub verdict: Verdict,
    pub reason: Option<String>,
}

/// Checks the sign hypotheses on the sampled data, then the sign of the solution.
pub fn nonneg_verify(sys: &MultiOrderSystem, sol: &SystemSolution, tol: f64) -> NonnegReport {
    let min_value = sol.min_value();
    let n = sys.n_components();
    let mut reason = None;
    'scan: for (i, &t) in sys.grid.nodes().iter().enumerate() {
        for l in 0..n {
            for &x in &sys.x {
                for j in 0..n {
                    if j != l && (sys.coupling)(l, j, x, t) < 0.0 {
                        reason = Some(format!("p_{l}{j} < 0 at (x, t) = ({x}, {t})"));
                        break 'scan;
                    }
                }
            }
            if let Some(f) = sys.sample_forcing(i, l) {
                if f.iter().any(|v| *v < 0.0) {
                    reason = Some(format!("F_{l} < 0 at t = {t}"));
                    break 'scan;
                }
            }
        }
    }
    if reason.is_none() {
        if let Some(l) = sys.initials.iter().position(|a| a.iter().any(|v| *v < 0.0)) {
            reason = Some(format!("a_{l} < 0 somewhere"));
        }
    }
    let verdict = match (&reason, min_value >= -tol) {
        (Some(_), _) => Verdict::NotApplicable,
        (None, true) => Verdict::Pass,
        (None, false) => Verdict::Fail,
    };
    NonnegReport { min_value, verdict, reason }
}

/// A seeded three-component cooperative system together with the shift `M_1`
/// it is solved with.
#[derive(Debug, Clone)]
pub struct RandomDraw {
    pub system: MultiOrderSystem,
    pub m1: f64,
}

/// Shift used for random draws; the diagonal never exceeds `0.26` in size.
pub const RANDOM_M1: f64 = 0.3;

/// Orders in `[0.9, 0.99)`, diagonal coupling in `[-0.26, 0.26]`, off-diagonal
/// coupling in `[0.25, 5.25]`, nonnegative forcing and initial values.
pub fn random_cooperative_system(
    rng: &mut impl rand::Rng,
    length: f64,
    n_grid: usize,
    grid: TimeGrid,
) -> Result<RandomDraw> {
    let mut al: Vec<f64> = (0..3).map(|_| rng.gen_range(0.9..0.99)).collect();
    al.sort_by(|a, b| a.total_cmp(b));
    if al[1] - al[0] < 0.01 || al[2] - al[1] < 0.01 {
        al[1] = 0.5 * (al[0] + al[2]);
    }
    let c: Vec<f64> = (0..9).map(|k| if k % 4 == 0 { rng.gen_range(-0.2..0.2) } else { rng.gen_range(0.5..3.5) }).collect();
    let ph: Vec<f64> = (0..9).map(|_| rng.gen_range(0.0..6.0)).collect();
    let amp: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..1.0)).collect();
    let fo: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..0.1)).collect();
    let system = MultiOrderSystem::new(al, length, n_grid, grid)?
        .with_coupling(move |l, j, x, t| {
            let k = 3 * l + j;
            if l == j {
                c[k] * (1.0 + 0.3 * (x + ph[k]).cos())
            } else {
                c[k] * (1.0 + 0.5 * (x * t + ph[k]).sin())
            }
        })
        .with_forcing(move |l, x, _| fo[l] * (1.0 + (x * (l as f64 + 1.0)).cos()))
        .with_initial(move |l, x| amp[l] * (1.0 + 0.2 * (x + l as f64).cos()));
    Ok(RandomDraw { system, m1: RANDOM_M1 })
}

/// Two equations of common order with reactions `f(u, v)` and `g(u, v)`.
#[derive(Clone)]
pub struct SemilinearPair {
    pub alpha: f64,
    pub f: PairFn,
    pub g: PairFn,
    pub a: Field,
    pub b: Field,
    pub length: f64,
    pub n_grid: usize,
    pub grid: TimeGrid,
    pub x: Vec<f64>,
    /// working box for `|u|, |v|`; defaults to `2 (1 + max(‖a‖, ‖b‖))`
    pub m: f64,
    /// basis shift; defaults to `max(1, diagonal_bound())`
    pub shift: Option<f64>,
}

impl fmt::Debug for SemilinearPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SemilinearPair")
            .field("alpha", &self.alpha)
            .field("n_grid", &self.n_grid)
            .field("m", &self.m)
            .finish_non_exhaustive()
    }
}

fn d1(f: &PairFn, x: f64, y: f64) -> f64 {
    let h = 1e-6 * x.abs().max(1.0);
    (f(x + h, y) - f(x - h, y)) / (2.0 * h)
}

fn d2(f: &PairFn, x: f64, y: f64) -> f64 {
    let h = 1e-6 * y.abs().max(1.0);
    (f(x, y + h) - f(x, y - h)) / (2.0 * h)
}

impl SemilinearPair {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        alpha: f64,
        f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        g: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        a: impl Fn(f64) -> f64,
        b: impl Fn(f64) -> f64,
        length: f64,
        n_grid: usize,
        grid: TimeGrid,
    ) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Domain(format!("order alpha = {alpha} must lie in (0, 1)")));
        }
        let x = EllipticOperator::laplacian(length).discretize(n_grid)?.x;
        let a: Field = x.iter().map(|&x| a(x)).collect();
        let b: Field = x.iter().map(|&x| b(x)).collect();
        let amp = a.iter().chain(&b).fold(0.0f64, |m, v| m.max(v.abs()));
        Ok(SemilinearPair { alpha, f: Arc::new(f), g: Arc::new(g), a, b, length, n_grid, grid, x, m: 2.0 * (1.0 + amp), shift: None })
    }

    pub fn with_box(mut self, m: f64) -> Self {
        self.m = m;
        self
    }

    pub fn with_shift(mut self, c0: f64) -> Self {
        self.shift = Some(c0);
        self
    }

    /// `1.1 max |∂_1 f|, |∂_2 g|` on a 101×101 lattice over the working box:
    /// the shift that keeps the discrete iteration order preserving.
    pub fn diagonal_bound(&self) -> f64 {
        let pts: Vec<f64> = (0..101).map(|k| -self.m + 2.0 * self.m * k as f64 / 100.0).collect();
        let mut s: f64 = 0.0;
        for &xi in &pts {
            for &eta in &pts {
                s = s.max(d1(&self.f, xi, eta).abs()).max(d2(&self.g, xi, eta).abs());
            }
        }
        1.1 * s
    }

    fn shift(&self) -> f64 {
        self.shift.unwrap_or_else(|| self.diagonal_bound().max(1.0))
    }
}

#[derive(Debug, Clone)]
pub struct PairSolution {
    pub u: Trajectory,
    pub v: Trajectory,
    pub report: VolterraReport,
}

/// Coupled Picard iteration to `1e-10` on adaptive windows.
pub fn semilinear_pair_solve(pair: &SemilinearPair) -> Result<PairSolution> {
    let c0 = pair.shift();
    let op = EllipticOperator::laplacian(pair.length).with_shift(c0);
    let disc = op.discretize(pair.n_grid)?;
    let n = disc.n_nodes();
    let basis = Arc::new(basis_from_discretization(disc, n)?);
    let prop = Arc::new(ModalPropagator::new(basis, pair.alpha, pair.grid.clone(), Reconstruction::PiecewiseLinear)?);
    let comps = [
        Component { prop: prop.clone(), initial: pair.a.clone() },
        Component { prop, initial: pair.b.clone() },
    ];
    let opts = VolterraOptions { amplitude_bound: Some(pair.m), ..Default::default() };
    let sol = solve_volterra(&comps, &opts, &mut |_, s: &[Field]| Ok(pair_rhs(pair, c0, &s[0], &s[1])))?;
    let mut it = sol.fields.into_iter();
    let mk = |s, name: &str| {
        let mut t = Trajectory::new(pair.grid.clone(), pair.x.clone(), s, name);
        t.meta.iterations = sol.report.inner_iterations;
        t.meta.residual = sol.report.max_residual;
        t
    };
    let u = mk(it.next().expect("u"), "picard-pair[u]");
    let v = mk(it.next().expect("v"), "picard-pair[v]");
    Ok(PairSolution { u, v, report: sol.report })
}

fn pair_rhs(pair: &SemilinearPair, c0: f64, u: &[f64], v: &[f64]) -> Vec<Field> {
    let gu = u.iter().zip(v).map(|(&p, &q)| c0 * p + (pair.f)(p, q)).collect();
    let gv = u.iter().zip(v).map(|(&p, &q)| c0 * q + (pair.g)(p, q)).collect();
    vec![gu, gv]
}

/// Independent oracle: implicit L1 stepping of the pair.
pub fn semilinear_pair_l1(pair: &SemilinearPair) -> Result<(Trajectory, Trajectory)> {
    let c0 = pair.shift();
    let disc = EllipticOperator::laplacian(pair.length).with_shift(c0).discretize(pair.n_grid)?;
    let comps = [
        L1Component { alpha: pair.alpha, disc: &disc, initial: pair.a.clone() },
        L1Component { alpha: pair.alpha, disc: &disc, initial: pair.b.clone() },
    ];
    let out = l1_march(&comps, &pair.grid, &mut |_, s| Ok(pair_rhs(pair, c0, &s[0], &s[1])), 1e-13, 200)?;
    let mut it = out.into_iter();
    let u = Trajectory::new(pair.grid.clone(), pair.x.clone(), it.next().expect("u"), "l1-pair[u]");
    let v = Trajectory::new(pair.grid.clone(), pair.x.clone(), it.next().expect("v"), "l1-pair[v]");
    Ok((u, v))
}

/// Square sampling box `[lo, hi]²` for the sign conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifyBox {
    pub lo: f64,
    pub hi: f64,
}

impl ClassifyBox {
    pub fn new(lo: f64, hi: f64) -> Self {
        ClassifyBox { lo, hi }
    }

    /// `[-M, M]²`
    pub fn symmetric(m: f64) -> Self {
        ClassifyBox { lo: -m, hi: m }
    }

    /// `[-M, M]²` with `M` the observed amplitude of both components plus 25%.
    pub fn from_solution(sol: &PairSolution) -> Self {
        let amp = [sol.u.min(), sol.u.max(), sol.v.min(), sol.v.max()].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Self::symmetric(1.25 * amp.max(f64::MIN_POSITIVE))
    }

    fn lattice(&self) -> Vec<f64> {
        (0..101).map(|k| self.lo + (self.hi - self.lo) * k as f64 / 100.0).collect()
    }
}

/// Which disjuncts of the sign conditions hold.
#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    /// 1–4, or `None` when neither condition on `f` or on `g` holds
    pub case: Option<u8>,
    /// `f(0, η) ≥ 0`
    pub f_first: bool,
    /// `∂_2 f ≥ 0` and `f(0, 0) = 0`
    pub f_second: bool,
    /// `g(ξ, 0) ≥ 0`
    pub g_first: bool,
    /// `∂_1 g ≥ 0` and `g(0, 0) = 0`
    pub g_second: bool,
    /// violating lattice points `(condition, ξ, η, value)`, at most 8 per condition
    pub witnesses: Vec<(String, f64, f64, f64)>,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.case {
            Some(c) => write!(f, "Case {c}"),
            None => f.write_str("none"),
        }
    }
}

const CLASSIFY_TOL: f64 = 1e-9;

/// Samples `f(0,η)`, `g(ξ,0)`, `∂_2 f`, `∂_1 g` on a 101×101 lattice.
pub fn cooperative_classify(f: &PairFn, g: &PairFn, bx: ClassifyBox) -> Classification {
    let pts = bx.lattice();
    let mut witnesses = Vec::new();
    let mut record = |name: &str, xi: f64, eta: f64, val: f64, count: &mut usize| {
        if *count < 8 {
            witnesses.push((name.to_string(), xi, eta, val));
        }
        *count += 1;
    };
    let (mut c_f1, mut c_f2, mut c_g1, mut c_g2) = (0, 0, 0, 0);
    for &eta in &pts {
        let v = f(0.0, eta);
        if v < -CLASSIFY_TOL {
            record("f(0,eta) >= 0", 0.0, eta, v, &mut c_f1);
        }
    }
    for &xi in &pts {
        let v = g(xi, 0.0);
        if v < -CLASSIFY_TOL {
            record("g(xi,0) >= 0", xi, 0.0, v, &mut c_g1);
        }
    }
    let f00 = f(0.0, 0.0);
    if f00.abs() > CLASSIFY_TOL {
        record("f(0,0) = 0", 0.0, 0.0, f00, &mut c_f2);
    }
    let g00 = g(0.0, 0.0);
    if g00.abs() > CLASSIFY_TOL {
        record("g(0,0) = 0", 0.0, 0.0, g00, &mut c_g2);
    }
    for &xi in &pts {
        for &eta in &pts {
            let a = d2(f, xi, eta);
            if a < -CLASSIFY_TOL {
                record("d2 f >= 0", xi, eta, a, &mut c_f2);
            }
            let b = d1(g, xi, eta);
            if b < -CLASSIFY_TOL {
                record("d1 g >= 0", xi, eta, b, &mut c_g2);
            }
        }
    }
    let (f_first, f_second, g_first, g_second) = (c_f1 == 0, c_f2 == 0, c_g1 == 0, c_g2 == 0);
    let case = match ((f_first, f_second), (g_first, g_second)) {
        ((true, _), (true, _)) => Some(1),
        ((true, _), (false, true)) => Some(2),
        ((false, true), (true, _)) => Some(3),
        ((false, true), (false, true)) => Some(4),
        _ => None,
    };
    Classification { case, f_first, f_second, g_first, g_second, witnesses }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairNonnegReport {
    pub classification: Classification,
    pub min_u: f64,
    pub min_v: f64,
    pub verdict: Verdict,
}

/// NOT-APPLICABLE unless a case applies and both initial values are non-negative.
pub fn pair_nonneg_verify(pair: &SemilinearPair, sol: &PairSolution, bx: ClassifyBox, tol: f64) -> PairNonnegReport {
    let classification = cooperative_classify(&pair.f, &pair.g, bx);
    let (min_u, min_v) = (sol.u.min(), sol.v.min());
    let initial_ok = pair.a.iter().chain(&pair.b).all(|v| *v >= 0.0);
    let verdict = if classification.case.is_none() || !initial_ok {
        Verdict::NotApplicable
    } else if min_u >= -tol && min_v >= -tol {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    PairNonnegReport { classification, min_u, min_v, verdict }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linsolve::{solve_linear, LinearProblem};
    use std::f64::consts::PI;

    fn pf(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> PairFn {
        Arc::new(f)
    }

    #[test]
    fn classification_cases() {
        let bx = ClassifyBox::symmetric(2.0);
        let c = |f: PairFn, g: PairFn| cooperative_classify(&f, &g, bx).case;
        assert_eq!(c(pf(|_, e| e * e), pf(|x, _| x * x)), Some(1));
        assert_eq!(c(pf(|x, e| e * e - x), pf(|x, e| x - e)), Some(2));
        assert_eq!(c(pf(|x, e| e - x), pf(|x, e| x * x - e)), Some(3));
        assert_eq!(c(pf(|x, e| e - x), pf(|x, e| x - e)), Some(4));
        let none = cooperative_classify(&pf(|_, e| -e), &pf(|x, _| x * x), bx);
        assert_eq!(none.case, None);
        assert!(none.witnesses.iter().any(|w| w.0.starts_with("f(0,eta)") && w.2 > 0.0));
    }

    #[test]
    fn remark_constructions_satisfy_the_conditions() {
        let bx = ClassifyBox::symmetric(3.0);
        let f = pf(|x, e| x.sin() * (1.0 + e * e) + e.powi(2) * 0.5);
        let r = cooperative_classify(&f, &pf(|x, _| x * x), bx);
        assert!(r.f_first);
        let f = pf(|x, e| (1.0 + x * x) * e.atan());
        let r = cooperative_classify(&f, &pf(|x, _| x * x), bx);
        assert!(r.f_second);
    }

    #[test]
    fn decoupled_system_is_two_relaxations() {
        let grid = TimeGrid::uniform(0.5, 16).unwrap();
        let sys = MultiOrderSystem::new(vec![0.4, 0.7], PI, 16, grid)
            .unwrap()
            .with_initial(|l, x| 1.0 + (l as f64 + 1.0) * x.cos());
        let sol = picard_system_solve(&sys, None).unwrap();
        let (_, props) = propagators(&sys, sol.m1).unwrap();
        let m1 = sol.m1;
        for l in 0..2 {
            let lin = LinearProblem::new(props[l].clone(), sys.initials[l].clone()).unwrap().with_reaction(move |_, _| m1);
            let want = solve_linear(&lin).unwrap();
            assert!(sol.trajectories[l].sup_distance(&want) < 1e-9);
        }
    }

    #[test]
    fn broken_cooperativity_is_not_applicable() {
        let grid = TimeGrid::uniform(0.5, 16).unwrap();
        let sys = MultiOrderSystem::new(vec![0.4, 0.7], PI, 8, grid)
            .unwrap()
            .with_coupling(|l, j, _, _| if l == 0 && j == 1 { -5.0 } else { 0.0 })
            .with_initial(|_, _| 1.0);
        let sol = picard_system_solve(&sys, None).unwrap();
        assert_eq!(nonneg_verify(&sys, &sol, 1e-8).verdict, Verdict::NotApplicable);
    }
}
