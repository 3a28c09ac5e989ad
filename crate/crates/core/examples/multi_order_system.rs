//! A seeded random cooperative system: sign, increment recursion and ratios.
use fracdiff::fracops::TimeGrid;
use fracdiff::systems::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> fracdiff::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let draw = random_cooperative_system(&mut rng, std::f64::consts::PI, 32, TimeGrid::uniform(3.0, 64)?)?;
    let sys = &draw.system;
    let sol = picard_system_solve(sys, Some(draw.m1))?;
    println!("orders {:?}, C = {:.3}, {} sweeps", sys.alphas, sol.c_bound, sol.report.sweeps);
    let nn = nonneg_verify(sys, &sol, 1e-8);
    println!("nonnegativity: {} (min {:.3e})", nn.verdict, nn.min_value);
    let rc = increment_recursion_check(sys, &sol)?;
    println!("U_n <= C J U_(n-1): {} (worst ratio {:.3})", rc.holds, rc.worst_ratio);
    let r = sol.increment_ratios();
    println!("increment ratios: first {:.3}, last {:.3}", r[0], r[r.len() - 1]);
    Ok(())
}
