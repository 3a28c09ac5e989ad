//! Upper/lower solutions for the enzyme reaction and the monotone iteration
//! squeezing them together.
use fracdiff::fracops::TimeGrid;
use fracdiff::semilinear::*;
use fracdiff::spectral::EllipticOperator;

fn main() -> fracdiff::Result<()> {
    let alpha = 0.5;
    let op = EllipticOperator::laplacian(std::f64::consts::PI);
    let grid = TimeGrid::uniform(1.0, 256)?;
    let term = SemilinearTerm::pointwise(|_, u| -u / (1.0 + u.abs()));
    let prob = SemilinearProblem::new(&op, 32, None, alpha, grid, |x| 1.0 + 0.1 * x.cos(), term)?;
    let lap: Vec<f64> = prob.disc().apply_unshifted(&prob.initial).iter().map(|v| -v).collect();
    let rho = enzyme_rho(&lap, alpha);
    let a = prob.initial.clone();
    let x = prob.x().to_vec();
    let pair = BracketPair::from_fns(&prob, |_, _| 0.0, |xv, t| {
        let k = x.iter().position(|&y| y == xv).expect("grid point");
        a[k] + rho * t.powf(alpha)
    });
    let up = check_upper_solution(&prob, &pair.upper, &pair.upper_a, 1e-8)?;
    let lo = check_lower_solution(&prob, &pair.lower, &pair.lower_a, 1e-8)?;
    println!("rho = {rho:.6}; upper residual >= {:.3e} ({}), lower residual <= {:.3e} ({})", up.min_residual, up.pass, lo.max_residual, lo.pass);

    let ctx = MonotoneContext::new(&prob, None)?;
    let out = monotone_iterate(&ctx, &pair, 60)?;
    for (k, g) in out.gap_history.iter().enumerate().step_by(3) {
        println!("  sweep {k:2}: gap {g:.3e}");
    }
    let u = out.u_star.expect("converged");
    let picard = picard_solve(&prob.with_shift(ctx.shift_m + 1.0)?, &PicardOptions::default())?.traj;
    println!("converged after {} sweeps; Picard agrees to {:.2e}", out.sweeps, u.sup_distance(&picard));
    Ok(())
}
