//! Picard iteration for a semilinear problem, with its contraction report.
use fracdiff::fracops::TimeGrid;
use fracdiff::semilinear::{picard_solve, solve_semilinear_l1, PicardOptions, SemilinearProblem, SemilinearTerm};
use fracdiff::spectral::EllipticOperator;

fn main() -> fracdiff::Result<()> {
    let op = EllipticOperator::laplacian(std::f64::consts::PI);
    let grid = TimeGrid::uniform(2.0, 256)?;
    let term = SemilinearTerm::pointwise(|_, u| u * (1.0 - u)).with_derivative(|_, u| 1.0 - 2.0 * u);
    let prob = SemilinearProblem::new(&op, 32, None, 0.7, grid, |x| 0.2 + 0.1 * x.cos(), term)?;
    let out = picard_solve(&prob, &PicardOptions::default())?;
    let r = &out.report;
    println!("sweeps {}, windows {}, final window {}, max ratio {:.3}, residual {:.1e}", r.sweeps, r.windows, r.final_window, r.max_ratio, r.residual);
    println!("u(T) ranges over [{:.6}, {:.6}]", out.traj.last().iter().copied().fold(f64::INFINITY, f64::min), out.traj.last().iter().copied().fold(f64::NEG_INFINITY, f64::max));
    let l1 = solve_semilinear_l1(&prob)?;
    println!("L1 oracle difference {:.2e}", out.traj.sup_distance(&l1));
    Ok(())
}
