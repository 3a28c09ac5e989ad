//! Sign-condition classification of pairs and the sign of their solutions.
use fracdiff::fracops::TimeGrid;
use fracdiff::systems::*;
use std::f64::consts::PI;

fn main() -> fracdiff::Result<()> {
    let grid = TimeGrid::uniform(0.5, 128)?;
    let pairs: Vec<(&str, SemilinearPair)> = vec![
        ("f = v^2, g = u^2", SemilinearPair::new(0.5, |_, v| v * v, |u, _| u * u, |x| 0.3 + 0.2 * x.cos(), |x| 0.2 - 0.1 * x.cos(), PI, 32, grid.clone())?),
        ("f = v - u, g = u - v", SemilinearPair::new(0.5, |u, v| v - u, |u, v| u - v, |x| 0.3 + 0.2 * x.cos(), |x| 0.2 - 0.1 * x.cos(), PI, 32, grid.clone())?),
        ("f = -v, g = u^2", SemilinearPair::new(0.5, |_, v| -v, |u, _| u * u, |x| 0.3 + 0.2 * x.cos(), |x| 0.2 - 0.1 * x.cos(), PI, 32, grid.clone())?),
    ];
    for (name, pair) in pairs {
        let sol = semilinear_pair_solve(&pair)?;
        let r = pair_nonneg_verify(&pair, &sol, ClassifyBox::from_solution(&sol), 1e-8);
        println!("{name:22} {:8} {:16} min u {:.3e}, min v {:.3e}", r.classification.to_string(), r.verdict.to_string(), r.min_u, r.min_v);
    }
    Ok(())
}
