//! Observed orders under time and space refinement.
use fracdiff::harness::{convergence_study, Refine};
use fracdiff::scenario::Scenario;

fn main() -> fracdiff::Result<()> {
    let l1 = Scenario::parse(
        "[scenario]\nname = l1\nkind = linear\nsolver = l1\n[domain]\nn_grid = 8\n[time]\nt_final = 1\nsteps = 16\n\
         [equation]\nalpha = 0.3\ninitial = 0\nforcing = 2*t^1.7/gamma(2.7)\nexact = t^2\n",
    )?;
    print!("{}", convergence_study(&l1, 5, Refine::Time)?);
    let space = Scenario::parse(
        "[scenario]\nname = sp\nkind = linear\n[domain]\nn_grid = 8\n[time]\nt_final = 0.5\nsteps = 16\n\
         [equation]\nalpha = 0.5\ninitial = cos(x)\n",
    )?;
    print!("{}", convergence_study(&space, 4, Refine::Space)?);
    Ok(())
}
