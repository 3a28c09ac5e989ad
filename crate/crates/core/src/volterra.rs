//! Fixed-point solver for discrete mild-solution equations
//! `u_c(t_i) = S_c(t_i) a_c + Σ_{j≤i} ω_c(i,j) g_c(t_j, u(t_j))`, one equation per
//! component `c`, all sharing one time grid and one spatial grid.
//!
//! Iteration proceeds over windows of time nodes. Inside a window every sweep
//! applies the map once to all window nodes (Picard); history from earlier
//! windows is frozen.

use crate::error::{Error, Result};
use crate::linsolve::ModalPropagator;
use crate::spectral::{Field, ModalCoeffs};
use std::sync::Arc;

#[derive(Debug, Clone)]
pub struct Component {
    pub prop: Arc<ModalPropagator>,
    pub initial: Field,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    /// one node at a time
    Marching,
    /// the whole grid at once; the iteration of the existence proof
    Global,
    Fixed(usize),
    /// start at 128 nodes, halve the window whenever a sweep sequence fails and
    /// double it after a window settles within a few sweeps
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolterraOptions {
    pub window: Window,
    /// stop when the sup-modal increment is below `tol * max(1, sup ‖u‖)`
    pub tol: f64,
    pub max_sweeps: usize,
    /// abort when `|u|` exceeds this anywhere
    pub amplitude_bound: Option<f64>,
    /// consecutive growing increments that count as divergence
    pub divergence_sweeps: usize,
    /// leading sweeps exempt from the growth count
    pub growth_allowance: usize,
    pub record_node_increments: bool,
}

impl Default for VolterraOptions {
    fn default() -> Self {
        VolterraOptions {
            window: Window::Adaptive,
            tol: 1e-10,
            max_sweeps: 200,
            amplitude_bound: None,
            divergence_sweeps: 5,
            growth_allowance: 0,
            record_node_increments: false,
        }
    }
}

impl VolterraOptions {
    /// Node-by-node marching with inner iteration to `1e-12`, at most 100 steps.
    pub fn marching() -> Self {
        VolterraOptions { window: Window::Marching, tol: 1e-12, max_sweeps: 100, ..Default::default() }
    }

    pub fn global() -> Self {
        VolterraOptions { window: Window::Global, ..Default::default() }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct VolterraReport {
    pub windows: usize,
    pub sweeps: usize,
    /// sweeps summed over windows, including abandoned attempts
    pub inner_iterations: usize,
    /// sup-modal increment of every sweep in multi-node windows
    pub increments: Vec<f64>,
    /// increment ratios of consecutive sweeps in multi-node windows
    pub ratios: Vec<f64>,
    /// `[sweep][node]`: `Σ_c ‖u_c^{k+1}(t_i) - u_c^k(t_i)‖`
    pub node_increments: Vec<Vec<f64>>,
    /// final increment, maximised over windows
    pub max_residual: f64,
    pub final_window: usize,
}

#[derive(Debug, Clone)]
pub struct VolterraSolution {
    /// `[component][node]`
    pub fields: Vec<Vec<Field>>,
    pub modal: Vec<Vec<ModalCoeffs>>,
    pub report: VolterraReport,
}

pub type Rhs<'a> = dyn FnMut(usize, &[Field]) -> Result<Vec<Field>> + 'a;

enum Failure {
    Stalled { residual: f64, sweeps: usize },
    Diverged { sweeps: usize, last: f64 },
    Escaped { node: usize, amplitude: f64, bound: f64 },
    Hard(Error),
}

struct State {
    u_hat: Vec<Vec<ModalCoeffs>>,
    u: Vec<Vec<Field>>,
    g_hat: Vec<Vec<ModalCoeffs>>,
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn eval_rhs(
    comps: &[Component],
    rhs: &mut Rhs<'_>,
    i: usize,
    st: &mut State,
) -> Result<()> {
    let states: Vec<Field> = st.u.iter().map(|uc| uc[i].clone()).collect();
    let g = rhs(i, &states)?;
    if g.len() != comps.len() {
        return Err(Error::DimensionMismatch { expected: comps.len(), got: g.len() });
    }
    for (c, gc) in g.iter().enumerate() {
        st.g_hat[c][i] = comps[c].prop.basis().project(gc)?;
    }
    Ok(())
}

pub fn solve_volterra(
    comps: &[Component],
    opts: &VolterraOptions,
    rhs: &mut Rhs<'_>,
) -> Result<VolterraSolution> {
    if comps.is_empty() {
        return Err(Error::Domain("no components".into()));
    }
    let grid = comps[0].prop.grid().clone();
    let nodes = comps[0].prop.basis().n_nodes();
    for c in comps {
        if c.prop.grid() != &grid || c.prop.basis().n_nodes() != nodes {
            return Err(Error::Domain("components must share time and space grids".into()));
        }
        if c.initial.len() != nodes {
            return Err(Error::DimensionMismatch { expected: nodes, got: c.initial.len() });
        }
    }
    let n = grid.len();
    let n_comp = comps.len();
    let a_hat: Vec<ModalCoeffs> = comps
        .iter()
        .map(|c| c.prop.basis().project(&c.initial))
        .collect::<Result<_>>()?;
    let mut st = State {
        u_hat: comps.iter().map(|c| vec![vec![0.0; c.prop.n_modes()]; n]).collect(),
        u: vec![vec![Vec::new(); n]; n_comp],
        g_hat: comps.iter().map(|c| vec![vec![0.0; c.prop.n_modes()]; n]).collect(),
    };
    for c in 0..n_comp {
        st.u_hat[c][0] = a_hat[c].clone();
        st.u[c][0] = comps[c].prop.basis().synthesize(&a_hat[c])?;
    }
    eval_rhs(comps, rhs, 0, &mut st)?;

    let mut report = VolterraReport::default();
    let mut width = match opts.window {
        Window::Marching => 1,
        Window::Global => n - 1,
        Window::Adaptive => (n - 1).min(128),
        Window::Fixed(w) => w.max(1),
    };
    let mut lo = 1;
    while lo < n {
        let hi = (lo + width - 1).min(n - 1);
        match run_window(comps, opts, rhs, &a_hat, &mut st, lo, hi, &mut report) {
            Ok((res, sweeps)) => {
                report.max_residual = report.max_residual.max(res);
                report.windows += 1;
                lo = hi + 1;
                if opts.window == Window::Adaptive && sweeps <= 12 {
                    width = (2 * width).min(n - 1);
                }
            }
            Err(fail) => {
                if let Failure::Hard(e) = fail {
                    return Err(e);
                }
                if opts.window == Window::Adaptive && hi > lo {
                    width = ((hi - lo + 1) / 2).max(1);
                    continue;
                }
                let t = grid.t(lo);
                return Err(match fail {
                    Failure::Stalled { residual, sweeps } => Error::NoConvergence {
                        node: lo,
                        t,
                        residual,
                        iterations: sweeps,
                    },
                    Failure::Diverged { sweeps, last } => Error::Divergence { sweeps, last },
                    Failure::Escaped { node, amplitude, bound } => Error::AmplitudeEscape {
                        node,
                        t: grid.t(node),
                        amplitude,
                        bound,
                    },
                    Failure::Hard(e) => e,
                });
            }
        }
    }
    report.final_window = width;
    Ok(VolterraSolution { fields: st.u, modal: st.u_hat, report })
}

#[allow(clippy::too_many_arguments)]
fn run_window(
    comps: &[Component],
    opts: &VolterraOptions,
    rhs: &mut Rhs<'_>,
    a_hat: &[ModalCoeffs],
    st: &mut State,
    lo: usize,
    hi: usize,
    report: &mut VolterraReport,
) -> std::result::Result<(f64, usize), Failure> {
    let n_comp = comps.len();
    let n = st.u[0].len();
    let multi = hi > lo;
    // frozen part of the history
    let mut hist: Vec<Vec<ModalCoeffs>> = Vec::with_capacity(n_comp);
    for (c, comp) in comps.iter().enumerate() {
        let p = &comp.prop;
        let mut hc = Vec::with_capacity(hi - lo + 1);
        for i in lo..=hi {
            let mut acc = p.apply_s_node(i, &a_hat[c]);
            for j in 0..lo {
                p.accumulate(i, j, &st.g_hat[c][j], &mut acc);
            }
            hc.push(acc);
        }
        hist.push(hc);
    }
    for c in 0..n_comp {
        for i in lo..=hi {
            st.u_hat[c][i] = st.u_hat[c][lo - 1].clone();
            st.u[c][i] = st.u[c][lo - 1].clone();
        }
    }
    // the carried state is the zeroth iterate on every node of the window
    for i in lo..=hi {
        eval_rhs(comps, rhs, i, st).map_err(Failure::Hard)?;
    }
    let mut prev = f64::INFINITY;
    let mut growing = 0;
    for sweep in 1..=opts.max_sweeps {
        report.inner_iterations += 1;
        let mut node_inc = vec![0.0; n];
        let mut scale: f64 = 0.0;
        let mut new_hat: Vec<Vec<ModalCoeffs>> = Vec::with_capacity(n_comp);
        for (c, comp) in comps.iter().enumerate() {
            let p = &comp.prop;
            let mut nc = Vec::with_capacity(hi - lo + 1);
            for i in lo..=hi {
                let mut acc = hist[c][i - lo].clone();
                for j in lo..=i {
                    p.accumulate(i, j, &st.g_hat[c][j], &mut acc);
                }
                let d: Vec<f64> = acc.iter().zip(&st.u_hat[c][i]).map(|(a, b)| a - b).collect();
                node_inc[i] += l2(&d);
                scale = scale.max(l2(&acc));
                nc.push(acc);
            }
            new_hat.push(nc);
        }
        for (c, nc) in new_hat.into_iter().enumerate() {
            let basis = comps[c].prop.basis();
            for (k, v) in nc.into_iter().enumerate() {
                let i = lo + k;
                st.u[c][i] = basis.synthesize(&v).map_err(Failure::Hard)?;
                st.u_hat[c][i] = v;
            }
        }
        if let Some(bound) = opts.amplitude_bound {
            for i in lo..=hi {
                for c in 0..n_comp {
                    let amp = st.u[c][i].iter().fold(0.0f64, |m, v| m.max(v.abs()));
                    if !(amp <= bound) {
                        return Err(Failure::Escaped { node: i, amplitude: amp, bound });
                    }
                }
            }
        }
        for i in lo..=hi {
            eval_rhs(comps, rhs, i, st).map_err(Failure::Hard)?;
        }
        let inc = node_inc.iter().copied().fold(0.0, f64::max);
        if !inc.is_finite() {
            return Err(Failure::Diverged { sweeps: sweep, last: inc });
        }
        if multi {
            report.increments.push(inc);
            if prev.is_finite() && prev > 0.0 {
                report.ratios.push(inc / prev);
            }
            if opts.record_node_increments {
                report.node_increments.push(node_inc);
            }
        }
        report.sweeps += 1;
        if inc <= opts.tol * scale.max(1.0) {
            return Ok((inc, sweep));
        }
        if inc > prev && sweep > opts.growth_allowance {
            growing += 1;
            if growing >= opts.divergence_sweeps {
                return Err(Failure::Diverged { sweeps: sweep, last: inc });
            }
        } else {
            growing = 0;
        }
        prev = inc;
    }
    Err(Failure::Stalled { residual: prev, sweeps: opts.max_sweeps })
}
