//! Homogeneous problem: every mode relaxes like E_α(-λ_n t^α).
use fracdiff::fracops::{Reconstruction, TimeGrid};
use fracdiff::linsolve::{solve_linear, LinearProblem, ModalPropagator};
use fracdiff::mlf::{ml, MlParams};
use fracdiff::spectral::{eigendecompose, EllipticOperator};
use std::sync::Arc;

fn main() -> fracdiff::Result<()> {
    let alpha = 0.5;
    let op = EllipticOperator::laplacian(std::f64::consts::PI).with_shift(1.0);
    let basis = Arc::new(eigendecompose(&op, 16, 64)?);
    let grid = TimeGrid::uniform(1.0, 128)?;
    let prop = Arc::new(ModalPropagator::new(basis.clone(), alpha, grid.clone(), Reconstruction::PiecewiseLinear)?);
    let n = 3;
    let a = basis.modes[n].clone();
    let traj = solve_linear(&LinearProblem::new(prop, a)?)?;
    let p = MlParams::new(alpha, 1.0)?;
    let mut err: f64 = 0.0;
    for (u, &t) in traj.states.iter().zip(grid.nodes()) {
        let c = basis.project(u)?;
        err = err.max((c[n] - ml(p, -basis.lambdas[n] * t.powf(alpha))?).abs());
    }
    println!("mode {n} (lambda {:.4}) follows E_alpha(-lambda t^alpha) to {err:.2e}", basis.lambdas[n]);
    Ok(())
}
