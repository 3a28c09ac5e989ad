//! Semilinear problems `∂^α(u - a) + A u = Q u + F + f(u)`: Picard iteration of
//! the mild-solution map, the monotone upper/lower-solution iteration,
//! residual checks for candidate brackets, comparison, steady states and
//! long-time decay envelopes.

use crate::error::{Error, Result};
use crate::fracops::{l1_coefficient, Reconstruction, TimeGrid};
use crate::l1::{l1_march, L1Component};
use crate::linsolve::{ModalPropagator, SpaceTimeFn};
use crate::mlf::KernelTables;
use crate::special::gamma;
use crate::spectral::{basis_from_discretization, Discretization, EigenBasis, EllipticOperator, Field, ModalCoeffs};
use crate::trajectory::Trajectory;
use crate::volterra::{solve_volterra, Component, VolterraOptions, VolterraReport, Window};
use std::fmt;
use std::sync::Arc;

/// `f(x, u)`
pub type PointwiseFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
/// `f(x, u, u_x)`
pub type GradientFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum TermKind {
    Pointwise(PointwiseFn),
    Gradient(GradientFn),
}

/// Nonlinearity with its working box `[-m, m]` and the bound `M` on `|∂f/∂u|` there.
#[derive(Clone)]
pub struct SemilinearTerm {
    pub kind: TermKind,
    /// analytic `∂f/∂u` for pointwise terms; finite differences otherwise
    pub derivative: Option<PointwiseFn>,
    /// working amplitude bound; `None` selects `2 (1 + ‖a‖_∞)` when a problem is built
    pub m: Option<f64>,
    /// filled in by [`SemilinearTerm::calibrate`]
    pub lipschitz_m: f64,
}

impl fmt::Debug for SemilinearTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            TermKind::Pointwise(_) => "pointwise",
            TermKind::Gradient(_) => "gradient",
        };
        f.debug_struct("SemilinearTerm")
            .field("kind", &kind)
            .field("m", &self.m)
            .field("lipschitz_m", &self.lipschitz_m)
            .finish_non_exhaustive()
    }
}

const LATTICE: usize = 201;

fn lattice(m: f64) -> impl Iterator<Item = f64> {
    (0..LATTICE).map(move |k| -m + 2.0 * m * k as f64 / (LATTICE - 1) as f64)
}

fn central(f: impl Fn(f64) -> f64, u: f64) -> f64 {
    let h = 1e-6 * u.abs().max(1.0);
    (f(u + h) - f(u - h)) / (2.0 * h)
}

impl SemilinearTerm {
    pub fn pointwise(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        SemilinearTerm { kind: TermKind::Pointwise(Arc::new(f)), derivative: None, m: None, lipschitz_m: 0.0 }
    }

    pub fn gradient(f: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        SemilinearTerm { kind: TermKind::Gradient(Arc::new(f)), derivative: None, m: None, lipschitz_m: 0.0 }
    }

    /// The zero nonlinearity.
    pub fn zero() -> Self {
        Self::pointwise(|_, _| 0.0)
    }

    pub fn with_derivative(mut self, df: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.derivative = Some(Arc::new(df));
        self
    }

    pub fn with_box(mut self, m: f64) -> Self {
        self.m = Some(m);
        self
    }

    pub fn is_pointwise(&self) -> bool {
        matches!(self.kind, TermKind::Pointwise(_))
    }

    /// `∂f/∂u` at `(x, u)` with zero gradient for gradient-dependent terms.
    pub fn du(&self, x: f64, u: f64) -> f64 {
        if let Some(df) = &self.derivative {
            return df(x, u);
        }
        match &self.kind {
            TermKind::Pointwise(f) => central(|v| f(x, v), u),
            TermKind::Gradient(f) => central(|v| f(x, v, 0.0), u),
        }
    }

    /// Sets the box (default `2 (1 + amplitude)`) and `M`: the largest sampled
    /// `|∂f/∂u|` over 201 values of `u` in `[-m, m]` and every `x`, plus 10%.
    /// Gradient terms also sample the gradient argument over `[-m, m]`.
    pub fn calibrate(mut self, x: &[f64], amplitude: f64) -> Self {
        let m = self.m.unwrap_or(2.0 * (1.0 + amplitude));
        self.m = Some(m);
        let mut sup: f64 = 0.0;
        match &self.kind {
            TermKind::Pointwise(_) => {
                for &xi in x {
                    for u in lattice(m) {
                        sup = sup.max(self.du(xi, u).abs());
                    }
                }
            }
            TermKind::Gradient(f) => {
                let coarse: Vec<f64> = (0..21).map(|k| -m + m * k as f64 / 10.0).collect();
                for &xi in x {
                    for &u in &coarse {
                        for &p in &coarse {
                            sup = sup.max(central(|v| f(xi, v, p), u).abs());
                        }
                    }
                }
            }
        }
        self.lipschitz_m = 1.1 * sup;
        self
    }

    pub fn box_bound(&self) -> f64 {
        self.m.unwrap_or(f64::INFINITY)
    }

    /// `f(u)` on the grid of `disc`.
    pub fn eval(&self, disc: &Discretization, u: &[f64]) -> Field {
        match &self.kind {
            TermKind::Pointwise(f) => disc.x.iter().zip(u).map(|(&x, &v)| f(x, v)).collect(),
            TermKind::Gradient(f) => {
                let ux = disc.gradient(u);
                disc.x.iter().zip(u).zip(&ux).map(|((&x, &v), &p)| f(x, v, p)).collect()
            }
        }
    }

    fn pointwise_fn(&self) -> Result<&PointwiseFn> {
        match &self.kind {
            TermKind::Pointwise(f) => Ok(f),
            TermKind::Gradient(_) => Err(Error::Unsupported(
                "gradient-dependent nonlinearities are accepted only by the Picard solver".into(),
            )),
        }
    }
}

/// `∂^α(u - a) + A u = b u_x + r u + F + f(u)` with `A = A_0 - c0`.
#[derive(Clone)]
pub struct SemilinearProblem {
    pub op: EllipticOperator,
    pub basis: Arc<EigenBasis>,
    pub alpha: f64,
    pub grid: TimeGrid,
    pub initial: Field,
    pub term: SemilinearTerm,
    pub drift: Option<SpaceTimeFn>,
    pub reaction: Option<SpaceTimeFn>,
    pub forcing: Option<SpaceTimeFn>,
    pub recon: Reconstruction,
}

impl fmt::Debug for SemilinearProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SemilinearProblem")
            .field("alpha", &self.alpha)
            .field("n_modes", &self.basis.n_modes())
            .field("n_steps", &self.grid.n_steps())
            .field("c0", &self.basis.disc.c0)
            .field("term", &self.term)
            .finish_non_exhaustive()
    }
}

impl SemilinearProblem {
    /// Uses the full discrete basis (`n_grid + 1` modes) unless `n_modes` is given.
    pub fn new(
        op: &EllipticOperator,
        n_grid: usize,
        n_modes: Option<usize>,
        alpha: f64,
        grid: TimeGrid,
        initial: impl Fn(f64) -> f64,
        term: SemilinearTerm,
    ) -> Result<Self> {
        let disc = op.discretize(n_grid)?;
        let a: Field = disc.x.iter().map(|&x| initial(x)).collect();
        Self::from_field(op, disc, n_modes, alpha, grid, a, term)
    }

    pub fn with_initial_field(
        op: &EllipticOperator,
        n_grid: usize,
        n_modes: Option<usize>,
        alpha: f64,
        grid: TimeGrid,
        initial: Field,
        term: SemilinearTerm,
    ) -> Result<Self> {
        let disc = op.discretize(n_grid)?;
        Self::from_field(op, disc, n_modes, alpha, grid, initial, term)
    }

    fn from_field(
        op: &EllipticOperator,
        disc: Discretization,
        n_modes: Option<usize>,
        alpha: f64,
        grid: TimeGrid,
        initial: Field,
        term: SemilinearTerm,
    ) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Domain(format!("order alpha = {alpha} must lie in (0, 1)")));
        }
        if initial.len() != disc.n_nodes() {
            return Err(Error::DimensionMismatch { expected: disc.n_nodes(), got: initial.len() });
        }
        let amp = initial.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let term = term.calibrate(&disc.x, amp);
        if amp > term.box_bound() {
            return Err(Error::Precondition(format!(
                "initial amplitude {amp:.4e} exceeds the working box m = {:.4e}",
                term.box_bound()
            )));
        }
        let n = n_modes.unwrap_or(disc.n_nodes());
        let basis = Arc::new(basis_from_discretization(disc, n)?);
        Ok(SemilinearProblem {
            op: op.clone(),
            basis,
            alpha,
            grid,
            initial,
            term,
            drift: None,
            reaction: None,
            forcing: None,
            recon: Reconstruction::PiecewiseLinear,
        })
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

    pub fn with_reconstruction(mut self, recon: Reconstruction) -> Self {
        self.recon = recon;
        self
    }

    /// Same problem with the basis rebuilt for the shift `c0`.
    pub fn with_shift(&self, c0: f64) -> Result<Self> {
        let mut p = self.clone();
        p.basis = Arc::new(self.basis.shifted(c0 - self.basis.disc.c0)?);
        p.op = p.op.with_shift(c0);
        Ok(p)
    }

    pub fn disc(&self) -> &Discretization {
        &self.basis.disc
    }

    pub fn c0(&self) -> f64 {
        self.basis.disc.c0
    }

    pub fn x(&self) -> &[f64] {
        &self.basis.disc.x
    }

    pub fn propagator(&self) -> Result<ModalPropagator> {
        ModalPropagator::new(self.basis.clone(), self.alpha, self.grid.clone(), self.recon)
    }

    fn sample(&self, f: &Option<SpaceTimeFn>, i: usize) -> Option<Field> {
        let t = self.grid.t(i);
        f.as_ref().map(|f| self.x().iter().map(|&x| f(x, t)).collect())
    }

    /// `Q(t_i) u + F(t_i) + f(u)`.
    pub fn source(&self, i: usize, u: &[f64]) -> Field {
        let disc = self.disc();
        let mut g = self.term.eval(disc, u);
        if let Some(fv) = self.sample(&self.forcing, i) {
            g.iter_mut().zip(&fv).for_each(|(a, b)| *a += b);
        }
        if let Some(r) = self.sample(&self.reaction, i) {
            g.iter_mut().zip(&r).zip(u).for_each(|((a, c), v)| *a += c * v);
        }
        if let Some(b) = self.sample(&self.drift, i) {
            let ux = disc.gradient(u);
            g.iter_mut().zip(&b).zip(&ux).for_each(|((a, c), v)| *a += c * v);
        }
        g
    }

    fn has_q(&self) -> bool {
        self.drift.is_some() || self.reaction.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardOptions {
    pub window: Window,
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for PicardOptions {
    fn default() -> Self {
        PicardOptions { window: Window::Adaptive, tol: 1e-10, max_sweeps: 200 }
    }
}

/// Per-sweep contraction ratios of the Picard iteration.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ContractionReport {
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    /// `max_ratio ≥ 1`
    pub flagged: bool,
    pub sweeps: usize,
    pub windows: usize,
    pub final_window: usize,
    pub residual: f64,
}

impl ContractionReport {
    fn from_volterra(r: &VolterraReport) -> Self {
        let max_ratio = r.ratios.iter().copied().fold(0.0, f64::max);
        ContractionReport {
            ratios: r.ratios.clone(),
            max_ratio,
            flagged: max_ratio >= 1.0,
            sweeps: r.inner_iterations,
            windows: r.windows,
            final_window: r.final_window,
            residual: r.max_residual,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PicardOutcome {
    pub traj: Trajectory,
    pub report: ContractionReport,
}

/// Fixed point of `L u = S a + K * (c0 u + Q u + F + f(u))` on the time grid.
pub fn picard_solve(prob: &SemilinearProblem, opts: &PicardOptions) -> Result<PicardOutcome> {
    let prop = Arc::new(prob.propagator()?);
    let c0 = prob.c0();
    let comps = [Component { prop: prop.clone(), initial: prob.initial.clone() }];
    let vopts = VolterraOptions {
        window: opts.window,
        tol: opts.tol,
        max_sweeps: opts.max_sweeps,
        amplitude_bound: prob.term.m,
        ..Default::default()
    };
    let sol = solve_volterra(&comps, &vopts, &mut |i: usize, u: &[Field]| {
        let mut g = prob.source(i, &u[0]);
        g.iter_mut().zip(&u[0]).for_each(|(a, v)| *a += c0 * v);
        Ok(vec![g])
    })?;
    let report = ContractionReport::from_volterra(&sol.report);
    let mut traj = Trajectory::new(
        prob.grid.clone(),
        prob.x().to_vec(),
        sol.fields.into_iter().next().expect("one component"),
        "picard",
    );
    traj.meta.iterations = report.sweeps;
    traj.meta.residual = report.residual;
    traj.meta.ratios = report.ratios.clone();
    Ok(PicardOutcome { traj, report })
}

/// Independent oracle: implicit L1 stepping of the same semilinear problem.
pub fn solve_semilinear_l1(prob: &SemilinearProblem) -> Result<Trajectory> {
    let disc = prob.disc();
    let c0 = prob.c0();
    let comps = [L1Component { alpha: prob.alpha, disc, initial: prob.initial.clone() }];
    let states = l1_march(
        &comps,
        &prob.grid,
        &mut |i, u| {
            let mut g = prob.source(i, &u[0]);
            g.iter_mut().zip(&u[0]).for_each(|(a, v)| *a += c0 * v);
            Ok(vec![g])
        },
        1e-13,
        200,
    )?;
    Ok(Trajectory::new(
        prob.grid.clone(),
        prob.x().to_vec(),
        states.into_iter().next().expect("one component"),
        "l1-implicit",
    ))
}

/// The monotone operator: `v = L u` solves
/// `∂^α(v - a) + A v + (M+1) v = (M+1) u + f(u) + F`.
#[derive(Debug, Clone)]
pub struct MonotoneContext {
    pub prob: SemilinearProblem,
    pub shift_m: f64,
    prop: Arc<ModalPropagator>,
    a_hat: ModalCoeffs,
}

impl MonotoneContext {
    /// `shift_m` defaults to the calibrated `M` of the problem's term.
    pub fn new(prob: &SemilinearProblem, shift_m: Option<f64>) -> Result<Self> {
        prob.term.pointwise_fn()?;
        if prob.has_q() {
            return Err(Error::Unsupported("the monotone iteration takes Q = 0".into()));
        }
        let m = shift_m.unwrap_or(prob.term.lipschitz_m);
        if m < prob.term.lipschitz_m {
            return Err(Error::Precondition(format!(
                "shift M = {m} is below the sampled bound {}",
                prob.term.lipschitz_m
            )));
        }
        let basis = Arc::new(prob.basis.shifted(m + 1.0 - prob.c0())?);
        let prop = Arc::new(ModalPropagator::new(basis.clone(), prob.alpha, prob.grid.clone(), prob.recon)?);
        let a_hat = basis.project(&prob.initial)?;
        Ok(MonotoneContext { prob: prob.clone(), shift_m: m, prop, a_hat })
    }

    pub fn apply(&self, states: &[Field]) -> Result<Vec<Field>> {
        let p = &self.prob;
        if states.len() != p.grid.len() {
            return Err(Error::DimensionMismatch { expected: p.grid.len(), got: states.len() });
        }
        let basis = self.prop.basis();
        let k = self.shift_m + 1.0;
        let g_hat: Vec<ModalCoeffs> = states
            .iter()
            .enumerate()
            .map(|(i, u)| {
                let mut g = p.source(i, u);
                g.iter_mut().zip(u).for_each(|(a, v)| *a += k * v);
                basis.project(&g)
            })
            .collect::<Result<_>>()?;
        let conv = self.prop.convolve_k(&g_hat)?;
        conv.into_iter()
            .enumerate()
            .map(|(i, mut c)| {
                let s = self.prop.apply_s_node(i, &self.a_hat);
                c.iter_mut().zip(&s).for_each(|(a, b)| *a += b);
                basis.synthesize(&c)
            })
            .collect()
    }
}

/// One application of the monotone operator.
pub fn monotone_step(ctx: &MonotoneContext, state: &Trajectory) -> Result<Trajectory> {
    let states = ctx.apply(&state.states)?;
    Ok(Trajectory::new(state.grid.clone(), state.x.clone(), states, "monotone-step"))
}

/// Ordered pair of candidate lower/upper solutions sampled on the problem grid.
#[derive(Debug, Clone)]
pub struct BracketPair {
    pub lower: Trajectory,
    pub upper: Trajectory,
    pub lower_a: Field,
    pub upper_a: Field,
}

impl BracketPair {
    /// Samples closed-form candidates `lower(x, t)`, `upper(x, t)` on the grids of `prob`.
    pub fn from_fns(
        prob: &SemilinearProblem,
        lower: impl Fn(f64, f64) -> f64,
        upper: impl Fn(f64, f64) -> f64,
    ) -> Self {
        let sample = |f: &dyn Fn(f64, f64) -> f64| -> Vec<Field> {
            prob.grid.nodes().iter().map(|&t| prob.x().iter().map(|&x| f(x, t)).collect()).collect()
        };
        let lo = sample(&lower);
        let up = sample(&upper);
        BracketPair {
            lower_a: lo[0].clone(),
            upper_a: up[0].clone(),
            lower: Trajectory::new(prob.grid.clone(), prob.x().to_vec(), lo, "lower-candidate"),
            upper: Trajectory::new(prob.grid.clone(), prob.x().to_vec(), up, "upper-candidate"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MonotoneOutcome {
    pub lower_seq: Vec<Trajectory>,
    pub upper_seq: Vec<Trajectory>,
    /// `sup |upper_k - lower_k|` for `k = 0, 1, …`
    pub gap_history: Vec<f64>,
    pub converged: bool,
    pub sweeps: usize,
    /// midpoint of the final pair when converged
    pub u_star: Option<Trajectory>,
}

pub const MONOTONE_GAP_TOL: f64 = 1e-6;
pub const MONOTONE_STEP_TOL: f64 = 1e-12;

fn ordered(lo: &[Field], hi: &[Field], sweep: usize, scale: f64) -> Result<()> {
    for (i, (a, b)) in lo.iter().zip(hi).enumerate() {
        for (k, (p, q)) in a.iter().zip(b).enumerate() {
            let excess = p - q;
            if excess > MONOTONE_STEP_TOL * scale {
                return Err(Error::MonotonicityViolation { sweep, node: i, point: k, excess });
            }
        }
    }
    Ok(())
}

/// Iterates lower and upper candidates under the monotone operator until
/// their gap drops below `1e-6` or `k_max` sweeps are spent; the chain
/// `lower_k ≤ lower_{k+1} ≤ upper_{k+1} ≤ upper_k` is enforced to `1e-12`.
pub fn monotone_iterate(ctx: &MonotoneContext, pair: &BracketPair, k_max: usize) -> Result<MonotoneOutcome> {
    let mut lower = pair.lower.states.clone();
    let mut upper = pair.upper.states.clone();
    let scale = |s: &[Field]| s.iter().flatten().fold(1.0f64, |m, v| m.max(v.abs()));
    let sc = scale(&lower).max(scale(&upper));
    ordered(&lower, &upper, 0, sc)?;
    let gap = |lo: &[Field], up: &[Field]| {
        lo.iter().zip(up).flat_map(|(a, b)| a.iter().zip(b).map(|(p, q)| (q - p).abs())).fold(0.0, f64::max)
    };
    let wrap = |s: Vec<Field>, name: &str| Trajectory::new(ctx.prob.grid.clone(), ctx.prob.x().to_vec(), s, name);
    let mut gaps = vec![gap(&lower, &upper)];
    let mut lower_seq = vec![wrap(lower.clone(), "lower")];
    let mut upper_seq = vec![wrap(upper.clone(), "upper")];
    let mut sweeps = 0;
    while *gaps.last().unwrap() >= MONOTONE_GAP_TOL && sweeps < k_max {
        sweeps += 1;
        let lo = ctx.apply(&lower)?;
        let up = ctx.apply(&upper)?;
        ordered(&lower, &lo, sweeps, sc)?;
        ordered(&lo, &up, sweeps, sc)?;
        ordered(&up, &upper, sweeps, sc)?;
        lower = lo;
        upper = up;
        gaps.push(gap(&lower, &upper));
        lower_seq.push(wrap(lower.clone(), "lower"));
        upper_seq.push(wrap(upper.clone(), "upper"));
    }
    let converged = *gaps.last().unwrap() < MONOTONE_GAP_TOL;
    let u_star = converged.then(|| {
        let mid = lower.iter().zip(&upper).map(|(a, b)| a.iter().zip(b).map(|(p, q)| 0.5 * (p + q)).collect()).collect();
        let mut t = wrap(mid, "monotone");
        t.meta.iterations = sweeps;
        t.meta.residual = *gaps.last().unwrap();
        t
    });
    Ok(MonotoneOutcome { lower_seq, upper_seq, gap_history: gaps, converged, sweeps, u_star })
}

/// Residual of a candidate bracket function at every time node after `t_0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    /// `[i-1][k]`: residual at time node `i ≥ 1`
    pub residual: Vec<Field>,
    pub min_residual: f64,
    pub max_residual: f64,
    /// `min(ā - a)` for upper candidates, `min(a - a_lower)` for lower ones
    pub initial_margin: f64,
    pub tol: f64,
    pub pass: bool,
}

/// `∂^α(w - w_0) + A w - Q w - F - f(w)` with the L1 derivative.
fn residual(prob: &SemilinearProblem, cand: &Trajectory, cand_a: &[f64]) -> Result<Vec<Field>> {
    let n = prob.grid.len();
    if cand.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: cand.len() });
    }
    let disc = prob.disc();
    let w: Vec<Field> = cand.states.iter().map(|s| s.iter().zip(cand_a).map(|(u, a)| u - a).collect()).collect();
    let mut out = Vec::with_capacity(n - 1);
    for i in 1..n {
        let mut r = disc.apply_unshifted(&cand.states[i]);
        for j in 1..=i {
            let b = l1_coefficient(prob.alpha, &prob.grid, i, j);
            r.iter_mut().zip(&w[j]).zip(&w[j - 1]).for_each(|((r, p), q)| *r += b * (p - q));
        }
        let g = prob.source(i, &cand.states[i]);
        r.iter_mut().zip(&g).for_each(|(r, g)| *r -= g);
        out.push(r);
    }
    Ok(out)
}

fn residual_report(res: Vec<Field>, initial_margin: f64, tol: f64, upper: bool) -> ResidualReport {
    let min_residual = res.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    let max_residual = res.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    let signed_ok = if upper { min_residual >= -tol } else { max_residual <= tol };
    ResidualReport {
        residual: res,
        min_residual,
        max_residual,
        initial_margin,
        tol,
        pass: signed_ok && initial_margin >= -tol,
    }
}

fn min_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p - q).fold(f64::INFINITY, f64::min)
}

/// Upper solution test: residual `≥ -tol` and `ā ≥ a - tol`.
pub fn check_upper_solution(
    prob: &SemilinearProblem,
    cand: &Trajectory,
    cand_a: &[f64],
    tol: f64,
) -> Result<ResidualReport> {
    let res = residual(prob, cand, cand_a)?;
    Ok(residual_report(res, min_diff(cand_a, &prob.initial), tol, true))
}

/// Lower solution test: residual `≤ tol` and `a_lower ≤ a + tol`.
pub fn check_lower_solution(
    prob: &SemilinearProblem,
    cand: &Trajectory,
    cand_a: &[f64],
    tol: f64,
) -> Result<ResidualReport> {
    let res = residual(prob, cand, cand_a)?;
    Ok(residual_report(res, min_diff(&prob.initial, cand_a), tol, false))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    NotApplicable,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::NotApplicable => "NOT-APPLICABLE",
        })
    }
}

#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub verdict: Verdict,
    /// `min (u_1 - u_2)` over all nodes; NaN when the solves were skipped
    pub min_gap: f64,
    pub tol: f64,
    pub reason: Option<String>,
    pub solutions: Option<(Trajectory, Trajectory)>,
}

impl ComparisonReport {
    fn not_applicable(reason: String, tol: f64) -> Self {
        ComparisonReport { verdict: Verdict::NotApplicable, min_gap: f64::NAN, tol, reason: Some(reason), solutions: None }
    }
}

/// Checks `f_1 ≥ f_2` on the sampled box and `a_1 ≥ a_2`, solves both problems
/// and reports the smallest gap. Both problems must share grids; neither may
/// carry a `Q` term. The shift `c0` is raised to `M` where needed so that the
/// discrete iteration is order preserving.
pub fn compare_solutions(p1: &SemilinearProblem, p2: &SemilinearProblem, tol: f64) -> Result<ComparisonReport> {
    let na = |r: &str| Ok(ComparisonReport::not_applicable(r.to_string(), tol));
    let (f1, f2) = match (p1.term.pointwise_fn(), p2.term.pointwise_fn()) {
        (Ok(a), Ok(b)) => (a.clone(), b.clone()),
        _ => return na("comparison needs pointwise nonlinearities"),
    };
    if p1.has_q() || p2.has_q() {
        return na("comparison is stated for Q = 0");
    }
    if p1.grid != p2.grid || p1.x() != p2.x() || p1.alpha != p2.alpha {
        return Err(Error::Domain("compared problems must share order and grids".into()));
    }
    if let Some(k) = p1.initial.iter().zip(&p2.initial).position(|(a, b)| a < b) {
        return na(&format!("a_1 < a_2 at x = {}", p1.x()[k]));
    }
    let m = p1.term.box_bound().max(p2.term.box_bound());
    for &x in p1.x() {
        for u in lattice(m) {
            if f1(x, u) < f2(x, u) {
                return na(&format!("f_1 < f_2 at (x, u) = ({x}, {u})"));
            }
        }
    }
    for i in 0..p1.grid.len() {
        if let (Some(a), Some(b)) = (p1.sample(&p1.forcing, i), p2.sample(&p2.forcing, i)) {
            if a.iter().zip(&b).any(|(p, q)| p < q) {
                return na("F_1 < F_2 somewhere");
            }
        } else if p1.forcing.is_some() != p2.forcing.is_some() {
            return na("forcing present in only one problem");
        }
    }
    let need = p1.term.lipschitz_m.max(p2.term.lipschitz_m);
    let fix = |p: &SemilinearProblem| if p.c0() < need { p.with_shift(need) } else { Ok(p.clone()) };
    let (q1, q2) = (fix(p1)?, fix(p2)?);
    let opts = PicardOptions::default();
    let u1 = picard_solve(&q1, &opts)?.traj;
    let u2 = picard_solve(&q2, &opts)?.traj;
    let min_gap = u1.min_gap(&u2);
    let amp = u1.min().abs().max(u1.max().abs()).max(u2.min().abs()).max(u2.max().abs());
    let (verdict, reason) = if amp > m {
        (Verdict::NotApplicable, Some(format!("solutions leave the box |u| <= {m} (max {amp:.4e})")))
    } else if min_gap >= -tol {
        (Verdict::Pass, None)
    } else {
        (Verdict::Fail, None)
    };
    Ok(ComparisonReport { verdict, min_gap, tol, reason, solutions: Some((u1, u2)) })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    pub x: Vec<f64>,
    pub u: Field,
    /// `max |A u - f(u)|`
    pub residual: f64,
    pub iterations: usize,
}

/// Damped Newton for `A u = f(x, u)` on the discrete operator.
pub fn steady_state_solve(
    op: &EllipticOperator,
    n_grid: usize,
    term: &SemilinearTerm,
    guess: Option<&[f64]>,
) -> Result<SteadyState> {
    let f = term.pointwise_fn()?;
    let disc = op.discretize(n_grid)?;
    let n = disc.n_nodes();
    let mut u: Field = match guess {
        Some(g) if g.len() == n => g.to_vec(),
        Some(g) => return Err(Error::DimensionMismatch { expected: n, got: g.len() }),
        None => vec![0.0; n],
    };
    let res = |u: &[f64]| -> Field {
        let mut r = disc.apply_unshifted(u);
        r.iter_mut().zip(&disc.x).zip(u).for_each(|((r, &x), &v)| *r -= f(x, v));
        r
    };
    let sup = |r: &[f64]| r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut r = res(&u);
    let mut norm = sup(&r);
    const MAX_IT: usize = 100;
    for it in 0..MAX_IT {
        if norm < 1e-10 {
            return Ok(SteadyState { x: disc.x.clone(), u, residual: norm, iterations: it });
        }
        let shift: Vec<f64> = disc.x.iter().zip(&u).map(|(&x, &v)| -term.du(x, v)).collect();
        let jac = disc.unshifted_matrix_plus(&shift);
        let step = jac.solve_pivoted(&r, 1e-300);
        if step.iter().any(|s| !s.is_finite()) {
            return Err(Error::NewtonDivergence { residual: norm, iterations: it + 1 });
        }
        let mut damp = 1.0;
        loop {
            let trial: Field = u.iter().zip(&step).map(|(a, s)| a - damp * s).collect();
            let rt = res(&trial);
            let nt = sup(&rt);
            if nt < norm || nt < 1e-10 {
                u = trial;
                r = rt;
                norm = nt;
                break;
            }
            damp *= 0.5;
            if damp < 1e-10 {
                return Err(Error::NewtonDivergence { residual: norm, iterations: it + 1 });
            }
        }
    }
    if norm < 1e-10 {
        return Ok(SteadyState { x: disc.x.clone(), u, residual: norm, iterations: MAX_IT });
    }
    Err(Error::NewtonDivergence { residual: norm, iterations: MAX_IT })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeReport {
    pub m1: f64,
    /// smallest eigenvalue of the unshifted operator `A`
    pub lambda1: f64,
    /// log-log slope of `sup_x |u - u_∞|` over the final decade
    pub fitted_slope: f64,
    pub fit_window: (f64, f64),
    pub violations: usize,
    /// largest `|u - u_∞| - envelope` seen (negative when strictly inside)
    pub max_excess: f64,
    pub tol: f64,
    /// `λ_1 t^α ≥ 10` at the final time
    pub tail_ok: bool,
}

/// Smallest `M_1` with `u_∞ - M_1 φ_1 ≤ a ≤ u_∞ + M_1 φ_1`.
pub fn envelope_m1(a: &[f64], u_inf: &[f64], phi1: &[f64]) -> f64 {
    a.iter().zip(u_inf).zip(phi1).map(|((a, u), p)| (a - u).abs() / p).fold(0.0, f64::max)
}

/// Checks `|u - u_∞| ≤ M_1 E_{α,1}(-λ_1 t^α) φ_1 + tol` at every node and fits
/// the decay slope over `[t_final / 10, t_final]`. `basis` is the eigenbasis of
/// `A_0 = A + c0` on the trajectory's spatial grid.
pub fn decay_envelope_check(
    traj: &Trajectory,
    u_inf: &[f64],
    basis: &EigenBasis,
    alpha: f64,
    tol: f64,
) -> Result<EnvelopeReport> {
    if u_inf.len() != basis.n_nodes() || traj.x.len() != basis.n_nodes() {
        return Err(Error::DimensionMismatch { expected: basis.n_nodes(), got: u_inf.len() });
    }
    let lambda1 = basis.lambdas[0] - basis.disc.c0;
    let phi1 = &basis.modes[0];
    let m1 = envelope_m1(&traj.states[0], u_inf, phi1);
    let tables = KernelTables::new(alpha)?;
    let mut violations = 0;
    let mut max_excess = f64::NEG_INFINITY;
    let mut sup_err = Vec::with_capacity(traj.len());
    for (u, &t) in traj.states.iter().zip(traj.grid.nodes()) {
        let e = tables.relaxation(lambda1.max(0.0), t);
        let mut s: f64 = 0.0;
        for ((v, w), p) in u.iter().zip(u_inf).zip(phi1) {
            let d = (v - w).abs();
            s = s.max(d);
            let excess = d - m1 * e * p;
            max_excess = max_excess.max(excess);
            if excess > tol {
                violations += 1;
            }
        }
        sup_err.push(s);
    }
    let t_end = traj.grid.final_time();
    let lo = t_end / 10.0;
    let pts: Vec<(f64, f64)> = traj
        .grid
        .nodes()
        .iter()
        .zip(&sup_err)
        .filter(|(&t, &e)| t >= lo && e > 0.0)
        .map(|(&t, &e)| (t.ln(), e.ln()))
        .collect();
    let fitted_slope = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    } else {
        f64::NAN
    };
    Ok(EnvelopeReport {
        m1,
        lambda1,
        fitted_slope,
        fit_window: (lo, t_end),
        violations,
        max_excess,
        tol,
        tail_ok: lambda1 * t_end.powf(alpha) >= 10.0,
    })
}

/// Largest `T ≤ t_max` with `pred(T)`, for predicates that hold on `(0, T*]` and
/// fail beyond; `None` when even tiny `T` fails.
pub fn bisect_time(pred: impl Fn(f64) -> bool, t_max: f64) -> Option<f64> {
    if pred(t_max) {
        return Some(t_max);
    }
    let mut lo = t_max;
    while !pred(lo) {
        lo *= 0.5;
        if lo < 1e-300 {
            return None;
        }
    }
    let mut hi = 2.0 * lo;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if pred(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Some(lo)
}

/// Constants behind the small-time bounds for a decreasing nonlinearity
/// `f(η) = -η/(1+|η|)` with Neumann data: `Δa ≤ Γ(α+1) ρ`.
pub fn enzyme_rho(delta_a: &[f64], alpha: f64) -> f64 {
    let sup = delta_a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    sup.max(1e-12) / gamma(alpha + 1.0)
}

/// Small-time constants for an increasing nonlinearity `f` and Neumann data `a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IncreasingBounds {
    pub epsilon: f64,
    /// upper bound `u - a ≤ t^{α-ε}` holds on `(0, T_1)`
    pub t1: f64,
    /// `max (-Δa)`
    pub m2: f64,
    pub delta1: f64,
    pub rho: f64,
    /// lower bound `u - a ≥ -ρ t^α` holds on `(0, T_2)`
    pub t2: f64,
    pub t3: f64,
    /// upper bound `u - a ≤ M_3 t^α` holds on `(0, T_3)`
    pub m3: f64,
}

/// Computes `T_1`, `M_2`, `ρ`, `T_2` and `M_3(T_3)` from their defining
/// inequalities; `delta_a` is the discrete Laplacian of `a` on the same grid.
pub fn increasing_bounds(
    f: impl Fn(f64) -> f64,
    a: &[f64],
    delta_a: &[f64],
    alpha: f64,
    epsilon: f64,
    t3: f64,
    t_max: f64,
) -> Result<IncreasingBounds> {
    if !(epsilon > 0.0 && epsilon < alpha) {
        return Err(Error::Domain(format!("epsilon = {epsilon} must lie in (0, alpha)")));
    }
    let a_max = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let a_min = a.iter().copied().fold(f64::INFINITY, f64::min);
    let a_sup = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let lap_max = delta_a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lap_sup = delta_a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let c = gamma(alpha - epsilon + 1.0) / gamma(1.0 - epsilon);
    let t1 = bisect_time(|t| c * t.powf(-epsilon) >= f(t.powf(alpha - epsilon) + a_max) + lap_max, t_max)
        .ok_or_else(|| Error::Domain("no admissible T_1".into()))?;
    let m2 = delta_a.iter().map(|v| -v).fold(f64::NEG_INFINITY, f64::max);
    if !(a_min > 0.0) {
        return Err(Error::Precondition("the lower bound needs min a > 0".into()));
    }
    let delta1 = a_min;
    let g = gamma(alpha + 1.0);
    let rho = ((m2 - f(0.5 * delta1)) / g).max(1e-12);
    let t2 = (delta1 / (2.0 * rho)).powf(1.0 / alpha);
    let need = |m: f64| m * g >= 2.0 * lap_sup && f(m * t3.powf(alpha) + a_sup) <= 0.5 * m * g;
    let mut lo = 2.0 * lap_sup / g;
    let m3 = if need(lo) {
        lo
    } else {
        let mut hi = lo.max(1.0);
        while !need(hi) {
            lo = hi;
            hi *= 2.0;
            if hi > 1e300 {
                return Err(Error::Domain("no admissible M_3 for this T_3".into()));
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if need(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    };
    Ok(IncreasingBounds { epsilon, t1, m2, delta1, rho, t2, t3, m3 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlf::{ml, MlParams};
    use std::f64::consts::PI;

    fn scalar(alpha: f64, n: usize, term: SemilinearTerm, a: f64) -> SemilinearProblem {
        let op = EllipticOperator::laplacian(PI);
        let grid = TimeGrid::uniform(1.0, n).unwrap();
        SemilinearProblem::new(&op, 8, None, alpha, grid, move |_| a, term).unwrap()
    }

    #[test]
    fn scalar_relaxation_matches_mittag_leffler() {
        let p = scalar(0.5, 128, SemilinearTerm::pointwise(|_, u| 1.0 - u), 0.0);
        let out = picard_solve(&p, &PicardOptions::default()).unwrap();
        let e = MlParams::new(0.5, 1.0).unwrap();
        for (u, &t) in out.traj.states.iter().zip(p.grid.nodes()) {
            let want = 1.0 - ml(e, -t.sqrt()).unwrap();
            assert!(u.iter().all(|v| (v - want).abs() < 1e-9), "t = {t}");
        }
        assert!(!out.report.flagged);
    }

    #[test]
    fn calibration_samples_the_box() {
        let t = SemilinearTerm::pointwise(|_, u| -u / (1.0 + u.abs())).calibrate(&[0.0, 1.0], 1.0);
        assert_eq!(t.m, Some(4.0));
        assert!((t.lipschitz_m - 1.1).abs() < 1e-5);
    }

    #[test]
    fn fixed_point_is_kept_by_monotone_step() {
        let p = scalar(0.6, 32, SemilinearTerm::pointwise(|_, u| -u / (1.0 + u.abs())), 1.0);
        let ctx = MonotoneContext::new(&p, None).unwrap();
        let q = p.with_shift(ctx.shift_m + 1.0).unwrap();
        let u = picard_solve(&q, &PicardOptions { tol: 1e-14, ..Default::default() }).unwrap().traj;
        let v = monotone_step(&ctx, &u).unwrap();
        assert!(u.sup_distance(&v) < 1e-12);
        let pair = BracketPair { lower: u.clone(), upper: u.clone(), lower_a: p.initial.clone(), upper_a: p.initial.clone() };
        let out = monotone_iterate(&ctx, &pair, 5).unwrap();
        assert_eq!(out.sweeps, 0);
        assert_eq!(out.gap_history, vec![0.0]);
    }

    #[test]
    fn inverted_bracket_is_rejected() {
        let p = scalar(0.5, 8, SemilinearTerm::zero(), 0.5);
        let ctx = MonotoneContext::new(&p, None).unwrap();
        let pair = BracketPair::from_fns(&p, |_, _| 1.0, |_, _| 0.0);
        assert!(matches!(monotone_iterate(&ctx, &pair, 3), Err(Error::MonotonicityViolation { sweep: 0, .. })));
    }

    #[test]
    fn gradient_terms_are_refused_by_monotone_ops() {
        let op = EllipticOperator::laplacian(PI);
        let grid = TimeGrid::uniform(0.5, 8).unwrap();
        let p = SemilinearProblem::new(&op, 16, None, 0.5, grid, |x| 0.1 * x.cos(), SemilinearTerm::gradient(|_, u, ux| -u * ux))
            .unwrap();
        assert!(matches!(MonotoneContext::new(&p, None), Err(Error::Unsupported(_))));
        let r = compare_solutions(&p, &p, 1e-8).unwrap();
        assert_eq!(r.verdict, Verdict::NotApplicable);
    }

    #[test]
    fn steady_state_of_a_linear_term() {
        let op = EllipticOperator::laplacian(1.0).with_c(|_| -1.0);
        let term = SemilinearTerm::pointwise(|x, u| 1.0 + x - u).with_derivative(|_, _| -1.0);
        let s = steady_state_solve(&op, 32, &term, None).unwrap();
        assert!(s.residual < 1e-10);
        let disc = op.discretize(32).unwrap();
        let mat = disc.unshifted_matrix_plus(&vec![1.0; 33]);
        let rhs: Vec<f64> = disc.x.iter().map(|x| 1.0 + x).collect();
        let want = mat.solve(&rhs).unwrap();
        assert!(s.u.iter().zip(&want).all(|(a, b)| (a - b).abs() < 1e-10));
    }

    #[test]
    fn bisection_finds_the_threshold() {
        let t = bisect_time(|t| t <= 0.3, 1.0).unwrap();
        assert!((t - 0.3).abs() < 1e-12);
        assert_eq!(bisect_time(|_| true, 2.0), Some(2.0));
        assert_eq!(bisect_time(|_| false, 2.0), None);
    }
}
