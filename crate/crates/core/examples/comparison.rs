//! Ordered data give ordered solutions; broken hypotheses are reported.
use fracdiff::fracops::TimeGrid;
use fracdiff::semilinear::{compare_solutions, SemilinearProblem, SemilinearTerm};
use fracdiff::spectral::EllipticOperator;

fn main() -> fracdiff::Result<()> {
    let op = EllipticOperator::laplacian(std::f64::consts::PI);
    let grid = TimeGrid::uniform(1.0, 128)?;
    let big = SemilinearProblem::new(&op, 32, None, 0.6, grid.clone(), |x| 1.0 + 0.2 * x.cos(), SemilinearTerm::pointwise(|_, u| 0.1 - u.powi(3)).with_box(3.0))?;
    let small = SemilinearProblem::new(&op, 32, None, 0.6, grid.clone(), |x| 0.5 + 0.2 * x.cos(), SemilinearTerm::pointwise(|_, u| -u.powi(3)).with_box(3.0))?;
    let r = compare_solutions(&big, &small, 1e-8)?;
    println!("ordered data: {} (min gap {:.3e})", r.verdict, r.min_gap);
    let r = compare_solutions(&small, &big, 1e-8)?;
    println!("swapped data: {} ({})", r.verdict, r.reason.unwrap_or_default());
    Ok(())
}
