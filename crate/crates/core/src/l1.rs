//! Implicit L1 time stepping for coupled nodal systems
//! `∂^{α_c}(u_c - a_c) + A_{0,c} u_c = g_c(t, u)`, used as an independent oracle.

use crate::error::{Error, Result};
use crate::fracops::{l1_coefficient, TimeGrid};
use crate::spectral::{Discretization, Field};

#[derive(Debug, Clone)]
pub struct L1Component<'a> {
    pub alpha: f64,
    pub disc: &'a Discretization,
    pub initial: Field,
}

/// Marches all components together; the right-hand side is resolved at each
/// step by fixed-point iteration to `tol` (relative), at most `max_iter` steps.
pub fn l1_march(
    comps: &[L1Component<'_>],
    grid: &TimeGrid,
    rhs: &mut dyn FnMut(usize, &[Field]) -> Result<Vec<Field>>,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<Vec<Field>>> {
    let n = grid.len();
    let nodes = comps[0].disc.n_nodes();
    let mut out: Vec<Vec<Field>> = comps.iter().map(|c| vec![c.initial.clone()]).collect();
    for i in 1..n {
        let mut hist: Vec<Field> = Vec::with_capacity(comps.len());
        let mut mats = Vec::with_capacity(comps.len());
        for (c, comp) in comps.iter().enumerate() {
            let bii = l1_coefficient(comp.alpha, grid, i, i);
            let states = &out[c];
            let mut h: Field = states[i - 1].iter().map(|u| bii * u).collect();
            for j in 1..i {
                let b = l1_coefficient(comp.alpha, grid, i, j);
                for ((r, p), q) in h.iter_mut().zip(&states[j]).zip(&states[j - 1]) {
                    *r -= b * (p - q);
                }
            }
            hist.push(h);
            mats.push(comp.disc.unshifted_matrix_plus(&vec![comp.disc.c0 + bii; nodes]));
        }
        let mut current: Vec<Field> = out.iter().map(|s| s[i - 1].clone()).collect();
        let mut converged = false;
        let mut last = f64::INFINITY;
        for _ in 0..max_iter {
            let g = rhs(i, &current)?;
            let mut inc: f64 = 0.0;
            let mut scale: f64 = 1.0;
            let mut next = Vec::with_capacity(comps.len());
            for c in 0..comps.len() {
                let r: Field = hist[c].iter().zip(&g[c]).map(|(a, b)| a + b).collect();
                let u = mats[c].solve(&r).map_err(|e| e.context(format!("L1 step {i}")))?;
                for (a, b) in u.iter().zip(&current[c]) {
                    inc = inc.max((a - b).abs());
                    scale = scale.max(a.abs());
                }
                next.push(u);
            }
            current = next;
            last = inc;
            if !inc.is_finite() {
                break;
            }
            if inc <= tol * scale {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NoConvergence { node: i, t: grid.t(i), residual: last, iterations: max_iter });
        }
        for (c, u) in current.into_iter().enumerate() {
            out[c].push(u);
        }
    }
    Ok(out)
}
