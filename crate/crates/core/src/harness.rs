//! Executes scenarios: builds the problem, runs the declared solver, evaluates
//! every property and renders a plain-text report.

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::fracops::{Reconstruction, TimeGrid};
use crate::linsolve::{solve_linear, solve_linear_l1, LinearProblem, ModalPropagator};
use crate::scenario::{EquationSpec, Kind, PropKind, PropertySpec, Scenario, SolverChoice};
use crate::semilinear::{
    check_lower_solution, check_upper_solution, compare_solutions, decay_envelope_check, enzyme_rho, monotone_iterate,
    picard_solve, solve_semilinear_l1, steady_state_solve, BracketPair, MonotoneContext, PicardOptions,
    SemilinearProblem, SemilinearTerm, SteadyState, Verdict,
};
use crate::spectral::{basis_from_discretization, EllipticOperator, Field};
use crate::systems::{
    increment_recursion_check, nonneg_verify, pair_nonneg_verify, picard_system_solve, random_cooperative_system,
    semilinear_pair_l1, semilinear_pair_solve, ClassifyBox, MultiOrderSystem, PairSolution, SemilinearPair,
    SystemSolution,
};
use crate::trajectory::Trajectory;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

/// Environment variable naming the output directory (default `.`).
pub const OUT_DIR_ENV: &str = "FRACDIFF_OUT_DIR";

fn num(v: f64) -> String {
    format!("{v:.6e}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyResult {
    pub name: String,
    pub kind: PropKind,
    pub verdict: Verdict,
    pub expected: Verdict,
    pub measured: Vec<(String, String)>,
    pub note: Option<String>,
}

impl PropertyResult {
    pub fn as_declared(&self) -> bool {
        self.verdict == self.expected
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub scenario: String,
    pub about: String,
    pub kind: Kind,
    pub solver: String,
    pub grid: String,
    /// solver statistics
    pub solve: Vec<(String, String)>,
    pub properties: Vec<PropertyResult>,
    /// extra text blocks, e.g. convergence tables
    pub sections: Vec<String>,
    pub runtime: Duration,
}

impl Report {
    pub fn all_as_declared(&self) -> bool {
        self.properties.iter().all(PropertyResult::as_declared)
    }

    pub fn count(&self, v: Verdict) -> usize {
        self.properties.iter().filter(|p| p.verdict == v).count()
    }

    /// Everything except the runtime line; identical inputs give identical bodies.
    pub fn body(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "scenario = {}", self.scenario);
        if !self.about.is_empty() {
            let _ = writeln!(s, "about = {}", self.about);
        }
        let _ = writeln!(s, "kind = {}", self.kind);
        let _ = writeln!(s, "solver = {}", self.solver);
        let _ = writeln!(s, "grid = {}", self.grid);
        for (k, v) in &self.solve {
            let _ = writeln!(s, "solve.{k} = {v}");
        }
        for p in &self.properties {
            let mark = if p.as_declared() { "" } else { "  UNEXPECTED" };
            let _ = writeln!(s, "property {} [{}]: {} (expected {}){mark}", p.name, p.kind.name(), p.verdict, p.expected);
            for (k, v) in &p.measured {
                let _ = writeln!(s, "  {k} = {v}");
            }
            if let Some(n) = &p.note {
                let _ = writeln!(s, "  note: {n}");
            }
        }
        for sec in &self.sections {
            s.push_str(sec);
            if !sec.ends_with('\n') {
                s.push('\n');
            }
        }
        let unexpected = self.properties.iter().filter(|p| !p.as_declared()).count();
        let _ = writeln!(
            s,
            "summary: {} properties, PASS {}, FAIL {}, NOT-APPLICABLE {}, unexpected {}",
            self.properties.len(),
            self.count(Verdict::Pass),
            self.count(Verdict::Fail),
            self.count(Verdict::NotApplicable),
            unexpected
        );
        s
    }

    pub fn render(&self) -> String {
        format!("{}runtime_s = {:.3}\n", self.body(), self.runtime.as_secs_f64())
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// A report plus the trajectory CSV written next to it.
#[derive(Debug, Clone)]
pub struct Run {
    pub report: Report,
    pub csv: String,
}

/// Which properties a run evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Select {
    All,
    /// solve only
    Nothing,
    Only(PropKind),
}

// ---------------------------------------------------------------- building

fn operator(sc: &Scenario) -> EllipticOperator {
    let d = &sc.domain;
    let p = d.p.clone();
    let c = d.c.clone();
    let op = EllipticOperator::laplacian(d.length)
        .with_p(move |x| p.eval_xt(x, 0.0))
        .with_c(move |x| c.eval_xt(x, 0.0))
        .with_robin(d.robin.0, d.robin.1);
    match d.shift {
        Some(s) => op.with_shift(s),
        None => op,
    }
}

fn time_grid(sc: &Scenario, steps: usize) -> Result<TimeGrid> {
    if sc.time.grading == 1.0 {
        TimeGrid::uniform(sc.time.t_final, steps)
    } else {
        TimeGrid::graded(sc.time.t_final, steps, sc.time.grading)
    }
}

fn term_from(reaction: &Expr, box_m: Option<f64>) -> SemilinearTerm {
    let r = reaction.clone();
    let mut term = if r.uses("ux") {
        SemilinearTerm::gradient(move |x, u, ux| r.eval(&[x, 0.0, u, 0.0, ux]))
    } else {
        let t = SemilinearTerm::pointwise(move |x, u| r.eval_xtu(x, 0.0, u));
        match reaction.derivative("u") {
            Some(d) => t.with_derivative(move |x, u| d.eval_xtu(x, 0.0, u)),
            None => t,
        }
    };
    if let Some(m) = box_m {
        term = term.with_box(m);
    }
    term
}

fn equation(sc: &Scenario) -> Result<&EquationSpec> {
    sc.equation.as_ref().ok_or_else(|| Error::Unsupported(format!("{} scenarios have no scalar equation", sc.kind)))
}

/// Scalar problem at a given resolution, with optional data overrides.
#[derive(Clone)]
enum ScalarProblem {
    Linear(LinearProblem),
    Semi(SemilinearProblem),
}

#[derive(Clone)]
struct Scalar {
    problem: ScalarProblem,
    op: EllipticOperator,
    n_grid: usize,
    steady: Option<SteadyState>,
}

#[derive(Default, Clone, Copy)]
struct Overrides<'a> {
    initial: Option<&'a Expr>,
    reaction: Option<&'a Expr>,
    forcing: Option<&'a Expr>,
}

fn build_scalar(sc: &Scenario, n_grid: usize, steps: usize, ov: Overrides<'_>) -> Result<Scalar> {
    let eq = equation(sc)?;
    let op = operator(sc);
    let grid = time_grid(sc, steps)?;
    let initial = ov.initial.unwrap_or(&eq.initial);
    let reaction = ov.reaction.unwrap_or(&eq.reaction);
    let forcing = ov.forcing.or(eq.forcing.as_ref()).cloned();
    let term = term_from(reaction, eq.box_m);
    let steady = if initial.uses("uinf") { Some(steady_state_solve(&op, n_grid, &term, None)?) } else { None };
    let disc = op.discretize(n_grid)?;
    let a: Field = disc
        .x
        .iter()
        .enumerate()
        .map(|(k, &x)| {
            let uinf = steady.as_ref().map_or(0.0, |s| s.u[k]);
            initial.eval(&[x, 0.0, 0.0, 0.0, 0.0, uinf])
        })
        .collect();
    let problem = match sc.kind {
        Kind::Linear => {
            let modes = sc.domain.modes.unwrap_or(disc.n_nodes());
            let c0 = disc.c0;
            let basis = Arc::new(basis_from_discretization(disc, modes)?);
            let prop = Arc::new(ModalPropagator::new(basis, eq.alpha, grid, Reconstruction::PiecewiseLinear)?);
            let lin = eq.linear.clone();
            // the basis carries A + c0; put c0 back on the right-hand side
            let mut p = LinearProblem::new(prop, a)?.with_reaction(move |x, t| c0 + lin.as_ref().map_or(0.0, |r| r.eval_xt(x, t)));
            if let Some(b) = eq.drift.clone() {
                p = p.with_drift(move |x, t| b.eval_xt(x, t));
            }
            if let Some(f) = forcing {
                p = p.with_forcing(move |x, t| f.eval_xt(x, t));
            }
            ScalarProblem::Linear(p)
        }
        _ => {
            let mut p = SemilinearProblem::with_initial_field(&op, n_grid, sc.domain.modes, eq.alpha, grid, a, term)?;
            if let Some(r) = eq.linear.clone() {
                p = p.with_reaction(move |x, t| r.eval_xt(x, t));
            }
            if let Some(b) = eq.drift.clone() {
                p = p.with_drift(move |x, t| b.eval_xt(x, t));
            }
            if let Some(f) = forcing {
                p = p.with_forcing(move |x, t| f.eval_xt(x, t));
            }
            ScalarProblem::Semi(p)
        }
    };
    Ok(Scalar { problem, op, n_grid, steady })
}

impl Scalar {
    fn solve(&self, solver: SolverChoice) -> Result<(Trajectory, Vec<(String, String)>)> {
        match (&self.problem, solver) {
            (ScalarProblem::Linear(p), SolverChoice::Spectral) => {
                let t = solve_linear(p)?;
                let stats = vec![("iterations".into(), t.meta.iterations.to_string())];
                Ok((t, stats))
            }
            (ScalarProblem::Linear(p), SolverChoice::L1) => Ok((solve_linear_l1(p)?, Vec::new())),
            (ScalarProblem::Semi(p), SolverChoice::Spectral) => {
                let out = picard_solve(p, &PicardOptions::default())?;
                let r = &out.report;
                let stats = vec![
                    ("sweeps".into(), r.sweeps.to_string()),
                    ("windows".into(), r.windows.to_string()),
                    ("final_window".into(), r.final_window.to_string()),
                    ("max_contraction_ratio".into(), num(r.max_ratio)),
                    ("residual".into(), num(r.residual)),
                    ("c0".into(), num(p.c0())),
                    ("lipschitz_m".into(), num(p.term.lipschitz_m)),
                ];
                Ok((out.traj, stats))
            }
            (ScalarProblem::Semi(p), SolverChoice::L1) => Ok((solve_semilinear_l1(p)?, Vec::new())),
        }
    }

    fn semi(&self) -> Option<&SemilinearProblem> {
        match &self.problem {
            ScalarProblem::Semi(p) => Some(p),
            ScalarProblem::Linear(_) => None,
        }
    }

    fn initial(&self) -> &[f64] {
        match &self.problem {
            ScalarProblem::Semi(p) => &p.initial,
            ScalarProblem::Linear(p) => &p.initial,
        }
    }
}

fn solver_name(sc: &Scenario) -> &'static str {
    match (sc.kind, sc.solver) {
        (Kind::Linear, SolverChoice::Spectral) => "spectral",
        (Kind::Semilinear, SolverChoice::Spectral) => "picard",
        (Kind::System | Kind::Pair, SolverChoice::Spectral) => "picard",
        (_, SolverChoice::L1) => "l1",
    }
}

fn grid_line(sc: &Scenario) -> String {
    format!(
        "length {}, n_grid {}, steps {}, t_final {}, grading {}",
        num(sc.domain.length),
        sc.domain.n_grid,
        sc.time.steps,
        num(sc.time.t_final),
        num(sc.time.grading)
    )
}

// ---------------------------------------------------------------- properties

struct Outcome {
    verdict: Verdict,
    measured: Vec<(String, String)>,
    note: Option<String>,
}

impl Outcome {
    fn new(pass: bool) -> Self {
        Outcome { verdict: if pass { Verdict::Pass } else { Verdict::Fail }, measured: Vec::new(), note: None }
    }

    fn na(note: impl Into<String>) -> Self {
        Outcome { verdict: Verdict::NotApplicable, measured: Vec::new(), note: Some(note.into()) }
    }

    fn m(mut self, k: &str, v: impl Into<String>) -> Self {
        self.measured.push((k.to_string(), v.into()));
        self
    }

    fn note(mut self, n: impl Into<String>) -> Self {
        self.note = Some(n.into());
        self
    }
}

/// `ρ` for the enzyme-type bounds: `sup Δa / Γ(α+1)`.
fn auto_rho(prob: &SemilinearProblem) -> f64 {
    let lap: Vec<f64> = prob.disc().apply_unshifted(&prob.initial).iter().map(|v| -v).collect();
    enzyme_rho(&lap, prob.alpha)
}

/// Samples a property expression on the problem grid; `a` is the initial value.
fn sample_prop(e: &Expr, grid: &TimeGrid, x: &[f64], a: &[f64], rho: f64, alpha: f64) -> Vec<Field> {
    grid.nodes()
        .iter()
        .map(|&t| x.iter().zip(a).map(|(&x, &ak)| e.eval(&[x, t, 0.0, 0.0, 0.0, ak, rho, alpha])).collect())
        .collect()
}

/// `(min value, x, t)` of `f(i, k)` over all nodes.
fn argmin(traj: &Trajectory, f: impl Fn(usize, usize) -> f64) -> (f64, f64, f64) {
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for i in 0..traj.len() {
        for k in 0..traj.x.len() {
            let v = f(i, k);
            if v < best.0 {
                best = (v, traj.x[k], traj.grid.t(i));
            }
        }
    }
    best
}

fn zero() -> Expr {
    Expr::constant(0.0)
}

fn scalar_property(sc: &Scenario, s: &Scalar, traj: &Trajectory, p: &PropertySpec) -> Result<Outcome> {
    let eq = equation(sc)?;
    match p.kind {
        PropKind::Nonneg => {
            let tol = p.f64_or("tol", 1e-8)?;
            let (v, x, t) = argmin(traj, |i, k| traj.states[i][k]);
            Ok(Outcome::new(v >= -tol).m("min_u", num(v)).m("at", format!("x {}, t {}", num(x), num(t))))
        }
        PropKind::Exact => {
            let tol = p.f64_or("tol", 1e-6)?;
            let ex = eq.exact.as_ref().ok_or_else(|| p.located("an exact property needs [equation] exact"))?;
            let err = exact_error(traj, ex, 1);
            Ok(Outcome::new(err <= tol).m("max_error", num(err)).m("tol", num(tol)))
        }
        PropKind::Oracle => {
            let tol = p.f64_or("tol", 1e-4)?;
            let other = match sc.solver {
                SolverChoice::Spectral => SolverChoice::L1,
                SolverChoice::L1 => SolverChoice::Spectral,
            };
            let (o, _) = s.solve(other)?;
            let d = traj.sup_distance(&o);
            Ok(Outcome::new(d <= tol).m("sup_difference", num(d)).m("oracle", o.meta.solver.clone()).m("tol", num(tol)))
        }
        PropKind::Convergence => {
            let levels = p.usize_or("levels", 3)?;
            let refine = match p.text("refine").unwrap_or("time") {
                "time" => Refine::Time,
                "space" => Refine::Space,
                other => return Err(p.located(format!("refine must be time or space, not '{other}'"))),
            };
            let min_order = p.f64_or("min_order", 1.0)?;
            let table = convergence_study(sc, levels, refine)?;
            let order = table.final_order().unwrap_or(f64::NAN);
            let mut o = Outcome::new(order >= min_order).m("observed_order", num(order)).m("min_order", num(min_order));
            for r in &table.rows {
                o = o.m(&format!("error[{}x{}]", r.n_grid, r.steps), num(r.error));
            }
            Ok(o.m("reference", table.reference.clone()))
        }
        _ => {
            let prob = s.semi().ok_or_else(|| p.located("property needs a semilinear scenario"))?;
            semilinear_property(sc, s, prob, traj, p)
        }
    }
}

fn semilinear_property(
    sc: &Scenario,
    s: &Scalar,
    prob: &SemilinearProblem,
    traj: &Trajectory,
    p: &PropertySpec,
) -> Result<Outcome> {
    let alpha = prob.alpha;
    let rho = match p.rho()? {
        Some(r) => r,
        None => auto_rho(prob),
    };
    let a = &prob.initial;
    let x = prob.x();
    match p.kind {
        PropKind::Bracket | PropKind::Monotone => {
            let tol = p.f64_or("tol", if p.kind == PropKind::Bracket { 1e-8 } else { 1e-6 })?;
            let lower = p.expr("lower")?.unwrap_or_else(zero);
            let upper = p.expr("upper")?.ok_or_else(|| p.located("needs 'upper'"))?;
            let lo = sample_prop(&lower, &prob.grid, x, a, rho, alpha);
            let up = sample_prop(&upper, &prob.grid, x, a, rho, alpha);
            let pair = BracketPair {
                lower_a: lo[0].clone(),
                upper_a: up[0].clone(),
                lower: Trajectory::new(prob.grid.clone(), x.to_vec(), lo, "lower-candidate"),
                upper: Trajectory::new(prob.grid.clone(), x.to_vec(), up, "upper-candidate"),
            };
            if p.kind == PropKind::Bracket {
                bracket(prob, traj, &pair, rho, tol)
            } else {
                let k_max = p.usize_or("k_max", 60)?;
                let shift_m = p.entry_f64("shift_m")?;
                monotone(prob, &pair, rho, k_max, shift_m, tol)
            }
        }
        PropKind::Bound => {
            let tol = p.f64_or("tol", 1e-8)?;
            let lower = p.expr("lower")?.unwrap_or_else(zero);
            let upper = p.expr("upper")?.ok_or_else(|| p.located("needs 'upper'"))?;
            let lo = sample_prop(&lower, &prob.grid, x, a, rho, alpha);
            let up = sample_prop(&upper, &prob.grid, x, a, rho, alpha);
            let (dl, xl, tl) = argmin(traj, |i, k| traj.states[i][k] - a[k] - lo[i][k]);
            let (du, xu, tu) = argmin(traj, |i, k| up[i][k] - (traj.states[i][k] - a[k]));
            Ok(Outcome::new(dl >= -tol && du >= -tol)
                .m("rho", num(rho))
                .m("min(u - a - lower)", num(dl))
                .m("at_lower", format!("x {}, t {}", num(xl), num(tl)))
                .m("min(upper - (u - a))", num(du))
                .m("at_upper", format!("x {}, t {}", num(xu), num(tu)))
                .m("tol", num(tol)))
        }
        PropKind::Comparison => {
            let tol = p.f64_or("tol", 1e-8)?;
            let (i2, r2, f2) = (p.plain_expr("initial")?, p.plain_expr("reaction")?, p.plain_expr("forcing")?);
            let ov = Overrides { initial: i2.as_ref(), reaction: r2.as_ref(), forcing: f2.as_ref() };
            let second = build_scalar(sc, s.n_grid, sc.time.steps, ov)?;
            let p2 = second.semi().expect("semilinear scenario");
            let rep = compare_solutions(prob, p2, tol)?;
            let mut o = Outcome { verdict: rep.verdict, measured: Vec::new(), note: rep.reason.clone() };
            o = o.m("min_gap", num(rep.min_gap)).m("tol", num(tol));
            Ok(o)
        }
        PropKind::Envelope => {
            let tol = p.f64_or("tol", 1e-8)?;
            let slope_tol = p.f64_or("slope_tol", 0.15)?;
            let ss = match &s.steady {
                Some(ss) => ss.clone(),
                None => steady_state_solve(&s.op, s.n_grid, &prob.term, None)?,
            };
            let rep = decay_envelope_check(traj, &ss.u, &prob.basis, alpha, tol)?;
            let slope_ok = (rep.fitted_slope + alpha).abs() <= slope_tol;
            let mut o = Outcome::new(rep.violations == 0 && slope_ok)
                .m("violations", rep.violations.to_string())
                .m("max_excess", num(rep.max_excess))
                .m("m1", num(rep.m1))
                .m("lambda1", num(rep.lambda1))
                .m("fitted_slope", num(rep.fitted_slope))
                .m("target_slope", num(-alpha))
                .m("fit_window", format!("{} .. {}", num(rep.fit_window.0), num(rep.fit_window.1)))
                .m("steady_residual", num(ss.residual));
            if !rep.tail_ok {
                o = o.note("lambda1 t^alpha < 10 at the final time; the fit window is not yet in the algebraic tail");
            }
            Ok(o)
        }
        _ => Err(p.located(format!("property '{}' does not apply here", p.kind.name()))),
    }
}

fn bracket(prob: &SemilinearProblem, traj: &Trajectory, pair: &BracketPair, rho: f64, tol: f64) -> Result<Outcome> {
    let up = check_upper_solution(prob, &pair.upper, &pair.upper_a, tol)?;
    let lo = check_lower_solution(prob, &pair.lower, &pair.lower_a, tol)?;
    let dl = traj.min_gap(&pair.lower);
    let du = pair.upper.min_gap(traj);
    let o = if up.pass && lo.pass { Outcome::new(dl >= -tol && du >= -tol) } else { Outcome::na("the candidates are not upper/lower solutions") };
    Ok(o.m("rho", num(rho))
        .m("upper_min_residual", num(up.min_residual))
        .m("upper_initial_margin", num(up.initial_margin))
        .m("lower_max_residual", num(lo.max_residual))
        .m("lower_initial_margin", num(lo.initial_margin))
        .m("min(u - lower)", num(dl))
        .m("min(upper - u)", num(du))
        .m("tol", num(tol)))
}

fn monotone(
    prob: &SemilinearProblem,
    pair: &BracketPair,
    rho: f64,
    k_max: usize,
    shift_m: Option<f64>,
    tol: f64,
) -> Result<Outcome> {
    let ctx = MonotoneContext::new(prob, shift_m)?;
    let out = match monotone_iterate(&ctx, pair, k_max) {
        Ok(o) => o,
        Err(e @ Error::MonotonicityViolation { .. }) => return Ok(Outcome::new(false).m("rho", num(rho)).note(e.to_string())),
        Err(e) => return Err(e),
    };
    let gap = *out.gap_history.last().expect("initial gap");
    let mut o = Outcome::new(false)
        .m("rho", num(rho))
        .m("shift_m", num(ctx.shift_m))
        .m("sweeps", out.sweeps.to_string())
        .m("final_gap", num(gap));
    let Some(u_star) = &out.u_star else {
        return Ok(o.note(format!("gap still {} after {k_max} sweeps", num(gap))));
    };
    // Picard on the same shift reproduces the monotone limit exactly
    let reference = picard_solve(&prob.with_shift(ctx.shift_m + 1.0)?, &PicardOptions::default())?.traj;
    let d = reference.sup_distance(u_star);
    o = o.m("picard_agreement", num(d)).m("tol", num(tol));
    o.verdict = if d <= tol { Verdict::Pass } else { Verdict::Fail };
    Ok(o)
}

fn exact_error(traj: &Trajectory, ex: &Expr, stride: usize) -> f64 {
    let mut err: f64 = 0.0;
    for (i, u) in traj.states.iter().enumerate() {
        let t = traj.grid.t(i);
        for (k, v) in u.iter().enumerate().step_by(stride) {
            err = err.max((v - ex.eval_xt(traj.x[k], t)).abs());
        }
    }
    err
}

// ---------------------------------------------------------------- systems

struct Draw {
    sys: MultiOrderSystem,
    m1: Option<f64>,
    sol: SystemSolution,
}

fn system_draws(sc: &Scenario) -> Result<Vec<Draw>> {
    let spec = sc.system.as_ref().expect("system scenario");
    let grid = time_grid(sc, sc.time.steps)?;
    let mut out = Vec::new();
    if let Some(k) = spec.random {
        let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
        for d in 0..k {
            let draw = random_cooperative_system(&mut rng, sc.domain.length, sc.domain.n_grid, grid.clone())?;
            let m1 = spec.m1.unwrap_or(draw.m1);
            let sol = picard_system_solve(&draw.system, Some(m1)).map_err(|e| e.context(format!("random draw {d}")))?;
            out.push(Draw { sys: draw.system, m1: Some(m1), sol });
        }
    } else {
        let coupling = spec.coupling.clone();
        let forcing = spec.forcing.clone();
        let initial = spec.initial.clone();
        let mut sys = MultiOrderSystem::new(spec.alphas.clone(), sc.domain.length, sc.domain.n_grid, grid)?
            .with_coupling(move |l, j, x, t| coupling[l][j].eval_xt(x, t))
            .with_initial(move |l, x| initial[l].eval_xt(x, 0.0));
        if forcing.iter().any(|f| !f.is_zero()) {
            sys = sys.with_forcing(move |l, x, t| forcing[l].eval_xt(x, t));
        }
        let sol = picard_system_solve(&sys, spec.m1)?;
        out.push(Draw { sys, m1: spec.m1, sol });
    }
    Ok(out)
}

fn aggregate(verdicts: &[Verdict]) -> Verdict {
    if verdicts.contains(&Verdict::Fail) {
        Verdict::Fail
    } else if !verdicts.is_empty() && verdicts.iter().all(|v| *v == Verdict::NotApplicable) {
        Verdict::NotApplicable
    } else {
        Verdict::Pass
    }
}

fn system_property(draws: &[Draw], p: &PropertySpec) -> Result<Outcome> {
    match p.kind {
        PropKind::Nonneg => {
            let tol = p.f64_or("tol", 1e-8)?;
            let reps: Vec<_> = draws.iter().map(|d| nonneg_verify(&d.sys, &d.sol, tol)).collect();
            let verdicts: Vec<Verdict> = reps.iter().map(|r| r.verdict).collect();
            let min = reps.iter().map(|r| r.min_value).fold(f64::INFINITY, f64::min);
            let mut o = Outcome { verdict: aggregate(&verdicts), measured: Vec::new(), note: None };
            o = o.m("draws", draws.len().to_string()).m("min_value", num(min)).m("tol", num(tol));
            if let Some(r) = reps.iter().find_map(|r| r.reason.clone()) {
                o = o.note(r);
            }
            Ok(o)
        }
        PropKind::Recursion => {
            let mut worst: f64 = 0.0;
            let mut failed = 0;
            for d in draws {
                let r = increment_recursion_check(&d.sys, &d.sol)?;
                worst = worst.max(r.worst_ratio);
                failed += usize::from(!r.holds);
            }
            Ok(Outcome::new(failed == 0)
                .m("draws", draws.len().to_string())
                .m("failed_draws", failed.to_string())
                .m("worst_ratio", num(worst))
                .m("c_bound", num(draws.iter().map(|d| d.sol.c_bound).fold(0.0, f64::max))))
        }
        PropKind::Ratio => {
            let factor = p.f64_or("factor", 10.0)?;
            let mut drops: Vec<f64> = Vec::new();
            let mut failed = 0;
            for d in draws {
                let r = d.sol.increment_ratios();
                let drop = if r.len() >= 2 { r[0] / r[r.len() - 1] } else { f64::NAN };
                failed += usize::from(!(drop > factor));
                drops.push(drop);
            }
            let mut sorted = drops.clone();
            sorted.sort_by(|a, b| a.total_cmp(b));
            let sweeps = draws.iter().map(|d| d.sol.report.sweeps).max().unwrap_or(0);
            Ok(Outcome::new(failed == 0)
                .m("draws", draws.len().to_string())
                .m("failed_draws", failed.to_string())
                .m("min_first_over_last", num(sorted.first().copied().unwrap_or(f64::NAN)))
                .m("median_first_over_last", num(sorted.get(sorted.len() / 2).copied().unwrap_or(f64::NAN)))
                .m("max_sweeps", sweeps.to_string())
                .m("m1", draws.first().and_then(|d| d.m1).map_or("default".into(), num)))
        }
        _ => Err(p.located(format!("property '{}' does not apply to systems", p.kind.name()))),
    }
}

// ---------------------------------------------------------------- pairs

fn build_pair(sc: &Scenario) -> Result<SemilinearPair> {
    let spec = sc.pair.as_ref().expect("pair scenario");
    let grid = time_grid(sc, sc.time.steps)?;
    let (f, g, a, b) = (spec.f.clone(), spec.g.clone(), spec.a.clone(), spec.b.clone());
    let mut pair = SemilinearPair::new(
        spec.alpha,
        move |u, v| f.eval_uv(u, v),
        move |u, v| g.eval_uv(u, v),
        move |x| a.eval_xt(x, 0.0),
        move |x| b.eval_xt(x, 0.0),
        sc.domain.length,
        sc.domain.n_grid,
        grid,
    )?;
    if let Some(m) = spec.box_m {
        pair = pair.with_box(m);
    }
    if let Some(c0) = sc.domain.shift {
        pair = pair.with_shift(c0);
    }
    Ok(pair)
}

fn classify_box(p: &PropertySpec, sol: &PairSolution) -> Result<ClassifyBox> {
    let amp = [sol.u.min(), sol.u.max(), sol.v.min(), sol.v.max()].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    match p.text("box").unwrap_or("auto") {
        "auto" => Ok(ClassifyBox::from_solution(sol)),
        "positive" => Ok(ClassifyBox::new(0.0, 1.25 * amp)),
        other => match other.parse::<f64>() {
            Ok(m) if m > 0.0 => Ok(ClassifyBox::symmetric(m)),
            _ => Err(p.located(format!("box must be auto, positive or a positive number, not '{other}'"))),
        },
    }
}

fn pair_property(pair: &SemilinearPair, sol: &PairSolution, p: &PropertySpec) -> Result<Outcome> {
    match p.kind {
        PropKind::Classify => {
            let want = match p.text("case") {
                None => return Err(p.located("classify needs 'case'")),
                Some("none") => None,
                Some(c) => Some(c.parse::<u8>().ok().filter(|c| (1..=4).contains(c)).ok_or_else(|| p.located("case must be 1-4 or none"))?),
            };
            let bx = classify_box(p, sol)?;
            let c = crate::systems::cooperative_classify(&pair.f, &pair.g, bx);
            let mut o = Outcome::new(c.case == want)
                .m("classified", c.to_string())
                .m("box", format!("[{}, {}]", num(bx.lo), num(bx.hi)))
                .m("conditions", format!("f_first {} f_second {} g_first {} g_second {}", c.f_first, c.f_second, c.g_first, c.g_second));
            if let Some(w) = c.witnesses.first() {
                o = o.m("first_witness", format!("{} fails at ({}, {}): {}", w.0, num(w.1), num(w.2), num(w.3)));
            }
            Ok(o)
        }
        PropKind::Nonneg => {
            let tol = p.f64_or("tol", 1e-8)?;
            let bx = classify_box(p, sol)?;
            let r = pair_nonneg_verify(pair, sol, bx, tol);
            Ok(Outcome { verdict: r.verdict, measured: Vec::new(), note: None }
                .m("classified", r.classification.to_string())
                .m("min_u", num(r.min_u))
                .m("min_v", num(r.min_v))
                .m("tol", num(tol)))
        }
        PropKind::Oracle => {
            let tol = p.f64_or("tol", 1e-4)?;
            let (lu, lv) = semilinear_pair_l1(pair)?;
            let d = sol.u.sup_distance(&lu).max(sol.v.sup_distance(&lv));
            Ok(Outcome::new(d <= tol).m("sup_difference", num(d)).m("tol", num(tol)))
        }
        _ => Err(p.located(format!("property '{}' does not apply to pairs", p.kind.name()))),
    }
}

/// CSV with a leading component column: `component,t,x_0,…`.
pub fn stacked_csv(parts: &[(&str, &Trajectory)]) -> String {
    let mut s = String::new();
    for (n, (name, t)) in parts.iter().enumerate() {
        let csv = t.to_csv();
        let mut lines = csv.lines();
        let header = lines.next().unwrap_or("");
        if n == 0 {
            let _ = writeln!(s, "component,{header}");
        }
        for l in lines {
            let _ = writeln!(s, "{name},{l}");
        }
    }
    s
}

// ---------------------------------------------------------------- entry points

fn result(p: &PropertySpec, o: Outcome) -> PropertyResult {
    PropertyResult { name: p.name.clone(), kind: p.kind, verdict: o.verdict, expected: p.expect, measured: o.measured, note: o.note }
}

fn selected(sel: Select, p: &PropertySpec) -> bool {
    match sel {
        Select::All => true,
        Select::Nothing => false,
        Select::Only(k) => p.kind == k,
    }
}

/// Runs the scenario's solver and the selected properties.
pub fn run(sc: &Scenario, sel: Select) -> Result<Run> {
    run_inner(sc, sel).map_err(|e| e.context(format!("scenario {}", sc.name)))
}

fn run_inner(sc: &Scenario, sel: Select) -> Result<Run> {
    let start = Instant::now();
    if let Select::Only(k) = sel {
        if !sc.properties.iter().any(|p| p.kind == k) {
            return Err(Error::Precondition(format!("no {} property is declared", k.name())));
        }
    }
    let props: Vec<&PropertySpec> = sc.properties.iter().filter(|p| selected(sel, p)).collect();
    let mut results = Vec::new();
    let (solve, csv) = match sc.kind {
        Kind::Linear | Kind::Semilinear => {
            let s = build_scalar(sc, sc.domain.n_grid, sc.time.steps, Overrides::default())?;
            let (traj, stats) = s.solve(sc.solver)?;
            for p in props {
                let o = scalar_property(sc, &s, &traj, p).map_err(|e| e.context(format!("property {}", p.name)))?;
                results.push(result(p, o));
            }
            let mut stats = stats;
            stats.push(("min_u".into(), num(traj.min())));
            stats.push(("max_u".into(), num(traj.max())));
            let a = s.initial();
            let dx = traj.last().iter().zip(a).fold(0.0f64, |m, (u, a)| m.max((u - a).abs()));
            stats.push(("sup_final_minus_initial".into(), num(dx)));
            (stats, traj.to_csv())
        }
        Kind::System => {
            let draws = system_draws(sc)?;
            for p in props {
                let o = system_property(&draws, p).map_err(|e| e.context(format!("property {}", p.name)))?;
                results.push(result(p, o));
            }
            let first = &draws[0];
            let names: Vec<String> = (0..first.sys.n_components()).map(|l| format!("u{}", l + 1)).collect();
            let parts: Vec<(&str, &Trajectory)> = names.iter().map(String::as_str).zip(&first.sol.trajectories).collect();
            let stats = vec![
                ("draws".into(), draws.len().to_string()),
                ("sweeps".into(), first.sol.report.sweeps.to_string()),
                ("m1".into(), num(first.sol.m1)),
                ("c_bound".into(), num(first.sol.c_bound)),
                ("alphas".into(), first.sys.alphas.iter().map(|a| num(*a)).collect::<Vec<_>>().join(" ")),
                ("min_value".into(), num(draws.iter().map(|d| d.sol.min_value()).fold(f64::INFINITY, f64::min))),
            ];
            (stats, stacked_csv(&parts))
        }
        Kind::Pair => {
            let pair = build_pair(sc)?;
            let sol = semilinear_pair_solve(&pair)?;
            for p in props {
                let o = pair_property(&pair, &sol, p).map_err(|e| e.context(format!("property {}", p.name)))?;
                results.push(result(p, o));
            }
            let stats = vec![
                ("sweeps".into(), sol.report.inner_iterations.to_string()),
                ("windows".into(), sol.report.windows.to_string()),
                ("min_u".into(), num(sol.u.min())),
                ("min_v".into(), num(sol.v.min())),
                ("box_m".into(), num(pair.m)),
            ];
            (stats, stacked_csv(&[("u", &sol.u), ("v", &sol.v)]))
        }
    };
    let report = Report {
        scenario: sc.name.clone(),
        about: sc.about.clone(),
        kind: sc.kind,
        solver: solver_name(sc).into(),
        grid: grid_line(sc),
        solve,
        properties: results,
        sections: Vec::new(),
        runtime: start.elapsed(),
    };
    Ok(Run { report, csv })
}

/// Parses and runs a scenario file.
pub fn run_scenario(path: &Path) -> Result<Run> {
    let sc = Scenario::from_file(path)?;
    run(&sc, Select::All)
}

/// Steady state of a semilinear scenario; the CSV has columns `x,u`.
pub fn steady(sc: &Scenario) -> Result<Run> {
    let start = Instant::now();
    let eq = equation(sc).map_err(|e| e.context(format!("scenario {}", sc.name)))?;
    let op = operator(sc);
    let term = term_from(&eq.reaction, eq.box_m);
    let ss = steady_state_solve(&op, sc.domain.n_grid, &term, None).map_err(|e| e.context(format!("scenario {}", sc.name)))?;
    let mut csv = String::from("x,u\n");
    for (x, u) in ss.x.iter().zip(&ss.u) {
        let _ = writeln!(csv, "{x:.17e},{u:.17e}");
    }
    let solve = vec![
        ("newton_iterations".into(), ss.iterations.to_string()),
        ("residual".into(), num(ss.residual)),
        ("min_u".into(), num(ss.u.iter().copied().fold(f64::INFINITY, f64::min))),
        ("max_u".into(), num(ss.u.iter().copied().fold(f64::NEG_INFINITY, f64::max))),
    ];
    let report = Report {
        scenario: sc.name.clone(),
        about: sc.about.clone(),
        kind: sc.kind,
        solver: "newton".into(),
        grid: format!("length {}, n_grid {}", num(sc.domain.length), sc.domain.n_grid),
        solve,
        properties: Vec::new(),
        sections: Vec::new(),
        runtime: start.elapsed(),
    };
    Ok(Run { report, csv })
}

// ---------------------------------------------------------------- convergence

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Refine {
    Time,
    Space,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub steps: usize,
    pub n_grid: usize,
    pub error: f64,
    /// `log2(e_{k-1} / e_k)`
    pub order: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub refine: Refine,
    /// `exact` or the finest grid used
    pub reference: String,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    pub fn final_order(&self) -> Option<f64> {
        self.rows.last().and_then(|r| r.order)
    }
}

impl fmt::Display for ConvergenceTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let what = match self.refine {
            Refine::Time => "time",
            Refine::Space => "space",
        };
        writeln!(f, "convergence ({what} refinement, reference {})", self.reference)?;
        writeln!(f, "  {:>8} {:>8} {:>14} {:>8}", "steps", "n_grid", "error", "order")?;
        for r in &self.rows {
            let order = r.order.map_or("-".to_string(), |o| format!("{o:.3}"));
            writeln!(f, "  {:>8} {:>8} {:>14} {:>8}", r.steps, r.n_grid, num(r.error), order)?;
        }
        Ok(())
    }
}

/// Errors at `levels` successive doublings of the time steps or the spatial
/// intervals, against the closed form when the scenario gives one and
/// against one further doubling otherwise. Errors are taken on the coarse
/// nodes, which every finer grid contains.
pub fn convergence_study(sc: &Scenario, levels: usize, refine: Refine) -> Result<ConvergenceTable> {
    if levels < 3 {
        return Err(Error::Domain(format!("a convergence study needs at least 3 levels, got {levels}")));
    }
    let eq = equation(sc)?;
    let res = |j: usize| match refine {
        Refine::Time => (sc.domain.n_grid, sc.time.steps << j),
        Refine::Space => (sc.domain.n_grid << j, sc.time.steps),
    };
    let solve = |j: usize| -> Result<Trajectory> {
        let (n, s) = res(j);
        let sc_j = build_scalar(sc, n, s, Overrides::default())?;
        Ok(sc_j.solve(sc.solver)?.0)
    };
    let (reference, fine) = match &eq.exact {
        Some(_) => ("exact".to_string(), None),
        None => {
            let (n, s) = res(levels);
            (format!("n_grid {n}, steps {s}"), Some(solve(levels)?))
        }
    };
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(levels);
    for j in 0..levels {
        let (n, s) = res(j);
        let u = solve(j)?;
        let error = match (&eq.exact, &fine) {
            (Some(ex), _) => exact_error(&u, ex, 1),
            (None, Some(f)) => {
                let r = 1usize << (levels - j);
                let (ri, rk) = match refine {
                    Refine::Time => (r, 1),
                    Refine::Space => (1, r),
                };
                let mut e: f64 = 0.0;
                for (i, ui) in u.states.iter().enumerate() {
                    for (k, v) in ui.iter().enumerate() {
                        e = e.max((v - f.states[i * ri][k * rk]).abs());
                    }
                }
                e
            }
            (None, None) => unreachable!(),
        };
        let order = rows.last().map(|p| (p.error / error).log2());
        rows.push(ConvergenceRow { steps: s, n_grid: n, error, order });
    }
    Ok(ConvergenceTable { refine, reference, rows })
}

/// Runs a convergence study and wraps it in a report; the CSV holds the
/// coarsest-level trajectory.
pub fn converge(sc: &Scenario, levels: usize) -> Result<Run> {
    let start = Instant::now();
    let refine = sc
        .properties
        .iter()
        .find(|p| p.kind == PropKind::Convergence)
        .and_then(|p| p.text("refine"))
        .map_or(Refine::Time, |r| if r == "space" { Refine::Space } else { Refine::Time });
    let table = convergence_study(sc, levels, refine).map_err(|e| e.context(format!("scenario {}", sc.name)))?;
    let mut run = run(sc, Select::Nothing)?;
    run.report.sections.push(table.to_string());
    run.report.solve.push(("observed_order".into(), table.final_order().map_or("-".into(), num)));
    run.report.runtime = start.elapsed();
    Ok(run)
}

// ---------------------------------------------------------------- output

pub fn output_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("."))
}

/// Writes through a temporary file in the same directory and renames it.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().and_then(|n| n.to_str()).ok_or_else(|| Error::Io(format!("bad output path {}", path.display())))?;
    let tmp = dir.join(format!(".{name}.tmp-{}-{:?}", std::process::id(), std::thread::current().id()));
    std::fs::write(&tmp, contents).map_err(|e| Error::Io(format!("{}: {e}", tmp.display())))?;
    std::fs::rename(&tmp, path).map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        Error::Io(format!("{}: {e}", path.display()))
    })
}

/// Writes `<name>.traj.csv` and `<name>.report.txt` into `dir`.
pub fn write_run(dir: &Path, run: &Run) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let name = &run.report.scenario;
    let csv = dir.join(format!("{name}.traj.csv"));
    let rep = dir.join(format!("{name}.report.txt"));
    write_atomic(&csv, &run.csv)?;
    write_atomic(&rep, &run.report.render())?;
    Ok((csv, rep))
}

#[derive(Debug)]
pub struct BundleEntry {
    pub path: PathBuf,
    pub outcome: Result<Run>,
}

impl BundleEntry {
    pub fn as_declared(&self) -> bool {
        matches!(&self.outcome, Ok(r) if r.report.all_as_declared())
    }
}

/// Every `*.scn` file in `dir`, sorted by name.
pub fn bundle_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "scn"))
        .collect();
    files.sort();
    Ok(files)
}

/// Runs every scenario of a directory concurrently, one thread each.
pub fn run_bundle(dir: &Path) -> Result<Vec<BundleEntry>> {
    let files = bundle_files(dir)?;
    let outcomes: Vec<Result<Run>> = std::thread::scope(|s| {
        let handles: Vec<_> = files.iter().map(|f| s.spawn(move || run_scenario(f))).collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Error::Domain("scenario thread panicked".into()))))
            .collect()
    });
    Ok(files.into_iter().zip(outcomes).map(|(path, outcome)| BundleEntry { path, outcome }).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    const RELAX: &str = "\
[scenario]
name = relax
kind = semilinear
[domain]
n_grid = 8
[time]
t_final = 1
steps = 64
[equation]
alpha = 0.5
initial = 0
reaction = 1 - u
exact = 1 - ml(0.5, 1, -t^0.5)
[property close]
type = exact
tol = 1e-5
[property positive]
type = nonneg
";

    #[test]
    fn relaxation_scenario_passes() {
        let sc = Scenario::parse(RELAX).unwrap();
        let run = run(&sc, Select::All).unwrap();
        assert!(run.report.all_as_declared(), "{}", run.report);
        assert_eq!(run.report.properties.len(), 2);
        assert!(run.csv.starts_with("t,x_0,"));
    }

    #[test]
    fn empty_scenario_has_no_verdicts() {
        let text = RELAX.split("[property").next().unwrap();
        let run = run(&Scenario::parse(text).unwrap(), Select::All).unwrap();
        assert!(run.report.properties.is_empty());
        assert!(run.report.all_as_declared());
        assert!(run.report.body().contains("summary: 0 properties"));
    }

    #[test]
    fn body_is_deterministic() {
        let sc = Scenario::parse(RELAX).unwrap();
        let a = run(&sc, Select::All).unwrap();
        let b = run(&sc, Select::All).unwrap();
        assert_eq!(a.report.body(), b.report.body());
        assert_eq!(a.csv, b.csv);
    }

    #[test]
    fn unexpected_verdicts_are_flagged() {
        let sc = Scenario::parse(&RELAX.replace("tol = 1e-5", "tol = 1e-5\nexpect = FAIL")).unwrap();
        let run = run(&sc, Select::All).unwrap();
        assert!(!run.report.all_as_declared());
        assert!(run.report.body().contains("UNEXPECTED"));
    }

    #[test]
    fn too_few_levels_is_an_error() {
        let sc = Scenario::parse(RELAX).unwrap();
        assert!(convergence_study(&sc, 2, Refine::Time).is_err());
    }

    #[test]
    fn atomic_write_replaces_contents() {
        let dir = std::env::temp_dir().join(format!("fracdiff-atomic-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("x.txt");
        write_atomic(&p, "one").unwrap();
        write_atomic(&p, "two").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "two");
        let leftovers = std::fs::read_dir(&dir).unwrap().count();
        assert_eq!(leftovers, 1);
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
