//! Sturm-Liouville eigenpairs with variable diffusion and a Robin end.
use fracdiff::spectral::{eigendecompose, EllipticOperator};
use std::f64::consts::PI;

fn main() -> fracdiff::Result<()> {
    let neumann = eigendecompose(&EllipticOperator::laplacian(PI).with_shift(0.0), 6, 256)?;
    println!("Neumann on (0, pi): lambda_n vs n^2");
    for (n, l) in neumann.lambdas.iter().enumerate() {
        println!("  {n}: {l:.6} ({})", n * n);
    }

    let op = EllipticOperator::laplacian(PI).with_p(|x| 1.0 + 0.5 * x.sin()).with_c(|x| 0.2 * x.cos()).with_robin(1.0, 0.0);
    let basis = eigendecompose(&op, 6, 128)?;
    println!("p = 1 + 0.5 sin x, c = 0.2 cos x, sigma = (1, 0); shift c0 = {}", basis.disc.c0);
    for (n, l) in basis.lambdas.iter().enumerate() {
        let phi = &basis.modes[n];
        println!("  {n}: lambda {l:.6}, norm {:.12}", basis.disc.norm(phi));
    }
    let u: Vec<f64> = basis.grid().iter().map(|x| x.cos()).collect();
    println!("energy of cos x outside the first 6 modes: {:.3e}", basis.tail_energy(&u)?);
    Ok(())
}
