//! Steady state and the algebraic approach towards it.
use fracdiff::fracops::TimeGrid;
use fracdiff::semilinear::*;
use fracdiff::spectral::EllipticOperator;

fn main() -> fracdiff::Result<()> {
    let op = EllipticOperator::laplacian(std::f64::consts::PI).with_c(|_| -2.0);
    let term = SemilinearTerm::pointwise(|_, u| 1.0 - u / (1.0 + u.abs()));
    let ss = steady_state_solve(&op, 32, &term, None)?;
    println!("steady state u_inf = {:.6} (Newton residual {:.1e})", ss.u[0], ss.residual);
    for alpha in [0.4, 0.7] {
        let grid = TimeGrid::uniform(100.0, 2000)?;
        let a: Vec<f64> = ss.x.iter().zip(&ss.u).map(|(x, u)| u + 0.5 * x.cos() + 0.2).collect();
        let prob = SemilinearProblem::with_initial_field(&op, 32, None, alpha, grid, a, term.clone())?;
        let traj = picard_solve(&prob, &PicardOptions::default())?.traj;
        let r = decay_envelope_check(&traj, &ss.u, &prob.basis, alpha, 1e-8)?;
        println!("alpha {alpha}: violations {}, max excess {:.2e}, slope {:.3} (target {})", r.violations, r.max_excess, r.fitted_slope, -alpha);
    }
    Ok(())
}
