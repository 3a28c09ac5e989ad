//! Evaluates E_{α,β} on the negative axis and checks E_{1/2}(-1) = e·erfc(1).
use fracdiff::mlf::{ml, select_method, MlParams};

fn main() -> fracdiff::Result<()> {
    let half = MlParams::new(0.5, 1.0)?;
    let v = ml(half, -1.0)?;
    // e·erfc(1)
    let closed = 0.427_583_576_155_807_f64;
    println!("E_0.5(-1) = {v:.16}  (e erfc 1 = {closed:.16}, diff {:.1e})", (v - closed).abs());

    println!("{:>6} {:>6} {:>10} {:>24} {:?}", "alpha", "beta", "z", "E", "method");
    for &(a, b) in &[(0.3, 1.0), (0.5, 0.5), (0.8, 1.0), (0.9, 1.9)] {
        let p = MlParams::new(a, b)?;
        for &z in &[-0.5, -5.0, -50.0, -500.0] {
            println!("{a:>6} {b:>6} {z:>10} {:>24.16e} {:?}", ml(p, z)?, select_method(a, -z));
        }
    }
    Ok(())
}
