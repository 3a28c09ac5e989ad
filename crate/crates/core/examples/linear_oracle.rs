//! Spectral mild solver against implicit L1 stepping with drift and reaction.
use fracdiff::fracops::{Reconstruction, TimeGrid};
use fracdiff::linsolve::{solve_linear, solve_linear_l1, LinearProblem, ModalPropagator};
use fracdiff::spectral::{eigendecompose, EllipticOperator};
use std::sync::Arc;

fn main() -> fracdiff::Result<()> {
    let alpha = 0.6;
    let op = EllipticOperator::laplacian(std::f64::consts::PI).with_p(|x| 1.0 + 0.2 * x.sin());
    let basis = Arc::new(eigendecompose(&op, 33, 32)?);
    for steps in [64, 128, 256, 512] {
        let grid = TimeGrid::graded(1.0, steps, (2.0 - alpha) / alpha)?;
        let prop = Arc::new(ModalPropagator::new(basis.clone(), alpha, grid, Reconstruction::PiecewiseLinear)?);
        let a = basis.grid().iter().map(|x| 1.0 + 0.3 * (2.0 * x).cos()).collect();
        let c0 = basis.disc.c0;
        let prob = LinearProblem::new(prop, a)?
            .with_drift(|x, t| 0.3 * x.sin() * (1.0 + t))
            .with_reaction(move |x, t| c0 - 0.5 + 0.2 * (x * t).cos())
            .with_forcing(|x, t| t * x.cos());
        let d = solve_linear(&prob)?.sup_distance(&solve_linear_l1(&prob)?);
        println!("N = {steps:4}: sup |spectral - L1| = {d:.3e}");
    }
    Ok(())
}
