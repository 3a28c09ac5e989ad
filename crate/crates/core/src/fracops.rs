//! Discrete Riemann-Liouville integrals, the L1 Caputo derivative and a
//! discrete `H_α` seminorm on time grids.

use crate::error::{Error, Result};
use crate::special::gamma;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridKind {
    Uniform,
    /// `t_i = T (i/N)^r`
    Graded(f64),
    Custom,
}

/// Time nodes `0 = t_0 < t_1 < … < t_N = T`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    nodes: Vec<f64>,
    kind: GridKind,
}

impl TimeGrid {
    pub fn uniform(t_final: f64, n_steps: usize) -> Result<Self> {
        Self::graded(t_final, n_steps, 1.0).map(|mut g| {
            g.kind = GridKind::Uniform;
            g
        })
    }

    pub fn graded(t_final: f64, n_steps: usize, r: f64) -> Result<Self> {
        if !(t_final > 0.0) || !t_final.is_finite() {
            return Err(Error::Domain(format!("final time {t_final} must be positive")));
        }
        if n_steps == 0 {
            return Err(Error::Domain("time grid needs at least one step".into()));
        }
        if !(r >= 1.0) {
            return Err(Error::Domain(format!("grading exponent {r} must be >= 1")));
        }
        let n = n_steps as f64;
        let mut nodes: Vec<f64> = (0..=n_steps)
            .map(|i| t_final * (i as f64 / n).powf(r))
            .collect();
        nodes[n_steps] = t_final;
        let kind = if r == 1.0 { GridKind::Uniform } else { GridKind::Graded(r) };
        Ok(TimeGrid { nodes, kind })
    }

    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 || nodes[0] != 0.0 {
            return Err(Error::Domain("grid must start at 0 and have at least two nodes".into()));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Domain("grid nodes must be strictly increasing".into()));
        }
        Ok(TimeGrid { nodes, kind: GridKind::Custom })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    /// Number of nodes, `N + 1`.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn n_steps(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn t(&self, i: usize) -> f64 {
        self.nodes[i]
    }

    pub fn final_time(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    /// `t_i - t_{i-1}`
    pub fn step(&self, i: usize) -> f64 {
        self.nodes[i] - self.nodes[i - 1]
    }

    /// True when the spacing is uniform to rounding, so Toeplitz weights apply.
    pub fn is_uniform(&self) -> bool {
        match self.kind {
            GridKind::Uniform => true,
            GridKind::Graded(_) => false,
            GridKind::Custom => {
                let h = self.step(1);
                (1..self.len()).all(|i| (self.step(i) - h).abs() <= 1e-12 * h)
            }
        }
    }
}

/// Scalar signal sampled on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSignal {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
}

impl SampledSignal {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        Ok(SampledSignal { grid, values })
    }

    pub fn from_fn(grid: &TimeGrid, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().iter().map(|&t| f(t)).collect();
        SampledSignal { grid: grid.clone(), values }
    }
}

/// How data between nodes is reconstructed for product integration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Reconstruction {
    #[default]
    PiecewiseLinear,
    /// left-endpoint rectangle rule
    PiecewiseConstant,
}

/// `τ₁^p - τ₀^p` without cancellation.
pub(crate) fn pow_diff(t0: f64, t1: f64, p: f64) -> f64 {
    if t0 == 0.0 {
        return t1.powf(p);
    }
    t0.powf(p) * (p * (t1 / t0).ln()).exp_m1()
}

/// Product-integration weights of `J^α` on one step: the kernel
/// `τ^{α-1}/Γ(α)` integrated over `τ ∈ [τ₀, τ₁]` against the hats peaking at
/// `τ₀` (near) and `τ₁` (far).
pub(crate) fn rl_step_weights(alpha: f64, tau0: f64, tau1: f64) -> (f64, f64) {
    let width = tau1 - tau0;
    let g1 = tau1.powf(alpha) / gamma(alpha + 1.0);
    let total = pow_diff(tau0, tau1, alpha) / gamma(alpha + 1.0);
    let dh = pow_diff(tau0, tau1, alpha + 1.0) / gamma(alpha + 2.0);
    let far = g1 - dh / width;
    (total - far, far)
}

fn check_order(alpha: f64, lo: f64, hi: f64, name: &str) -> Result<()> {
    if !(alpha > lo && alpha < hi) {
        return Err(Error::Domain(format!("{name} order alpha = {alpha} must lie in ({lo}, {hi})")));
    }
    Ok(())
}

/// `J^α` applied to a sampled signal by product integration.
pub fn rl_integral(alpha: f64, sig: &SampledSignal) -> Result<SampledSignal> {
    rl_integral_with(alpha, sig, Reconstruction::PiecewiseLinear)
}

pub fn rl_integral_with(
    alpha: f64,
    sig: &SampledSignal,
    recon: Reconstruction,
) -> Result<SampledSignal> {
    check_order(alpha, 0.0, 2.0, "integral")?;
    let values = rl_integral_values(alpha, &sig.grid, &sig.values, recon);
    Ok(SampledSignal { grid: sig.grid.clone(), values })
}

/// Raw form of [`rl_integral_with`] on a value slice.
pub fn rl_integral_values(
    alpha: f64,
    grid: &TimeGrid,
    values: &[f64],
    recon: Reconstruction,
) -> Vec<f64> {
    let t = grid.nodes();
    let n = t.len();
    let mut out = vec![0.0; n];
    if grid.is_uniform() {
        let h = grid.step(1);
        let w: Vec<(f64, f64)> = (0..n - 1)
            .map(|m| rl_step_weights(alpha, m as f64 * h, (m + 1) as f64 * h))
            .collect();
        for i in 1..n {
            let mut acc = 0.0;
            for j in 1..=i {
                let (near, far) = w[i - j];
                acc += match recon {
                    Reconstruction::PiecewiseLinear => near * values[j] + far * values[j - 1],
                    Reconstruction::PiecewiseConstant => (near + far) * values[j - 1],
                };
            }
            out[i] = acc;
        }
    } else {
        for i in 1..n {
            let mut acc = 0.0;
            for j in 1..=i {
                let (near, far) = rl_step_weights(alpha, t[i] - t[j], t[i] - t[j - 1]);
                acc += match recon {
                    Reconstruction::PiecewiseLinear => near * values[j] + far * values[j - 1],
                    Reconstruction::PiecewiseConstant => (near + far) * values[j - 1],
                };
            }
            out[i] = acc;
        }
    }
    out
}

/// L1 coefficient `b_{ij}` multiplying `w_j - w_{j-1}` in the Caputo derivative at `t_i`.
pub fn l1_coefficient(alpha: f64, grid: &TimeGrid, i: usize, j: usize) -> f64 {
    let t = grid.nodes();
    let dj = t[j] - t[j - 1];
    pow_diff(t[i] - t[j], t[i] - t[j - 1], 1.0 - alpha) / (gamma(2.0 - alpha) * dj)
}

/// L1 Caputo derivative; the value at `t_0` is reported as 0 (empty sum).
pub fn caputo_l1(alpha: f64, sig: &SampledSignal) -> Result<SampledSignal> {
    check_order(alpha, 0.0, 1.0, "Caputo")?;
    let grid = &sig.grid;
    let w = &sig.values;
    let n = grid.len();
    let mut out = vec![0.0; n];
    for (i, o) in out.iter_mut().enumerate().skip(1) {
        *o = (1..=i)
            .map(|j| l1_coefficient(alpha, grid, i, j) * (w[j] - w[j - 1]))
            .sum();
    }
    Ok(SampledSignal { grid: grid.clone(), values: out })
}

/// Discrete `H_α` seminorm `‖∂^α sig‖_{L²(0,T)}`, right-endpoint rule.
pub fn halpha_seminorm(alpha: f64, sig: &SampledSignal) -> Result<f64> {
    check_order(alpha, 0.0, 1.0, "Caputo")?;
    let scale = sig.values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    if sig.values[0].abs() > 1e-12 * scale {
        return Err(Error::Precondition(format!(
            "H_alpha surrogate needs sig(0) = 0, got {}",
            sig.values[0]
        )));
    }
    let d = caputo_l1(alpha, sig)?;
    let g = &sig.grid;
    let sum: f64 = (1..g.len()).map(|i| g.step(i) * d.values[i].powi(2)).sum();
    Ok(sum.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids_are_validated() {
        assert!(TimeGrid::uniform(0.0, 4).is_err());
        assert!(TimeGrid::graded(1.0, 4, 0.5).is_err());
        assert!(TimeGrid::from_nodes(vec![0.0, 0.5, 0.5]).is_err());
        let g = TimeGrid::graded(2.0, 8, 2.0).unwrap();
        assert_eq!(g.final_time(), 2.0);
        assert!((g.t(4) - 0.5).abs() < 1e-15);
        assert!(!g.is_uniform());
        assert!(TimeGrid::from_nodes(vec![0.0, 0.25, 0.5]).unwrap().is_uniform());
    }

    #[test]
    fn integral_of_constant_and_linear_is_exact() {
        for grid in [TimeGrid::uniform(1.0, 32).unwrap(), TimeGrid::graded(1.0, 32, 2.5).unwrap()] {
            let one = SampledSignal::from_fn(&grid, |_| 1.0);
            let j = rl_integral(0.5, &one).unwrap();
            for (t, v) in grid.nodes().iter().zip(&j.values) {
                assert!((v - t.powf(0.5) / gamma(1.5)).abs() < 1e-14);
            }
            let lin = SampledSignal::from_fn(&grid, |t| t);
            let j = rl_integral(0.7, &lin).unwrap();
            for (t, v) in grid.nodes().iter().zip(&j.values) {
                assert!((v - t.powf(1.7) / gamma(2.7)).abs() < 1e-13);
            }
        }
        let one = SampledSignal::from_fn(&TimeGrid::uniform(1.0, 4).unwrap(), |_| 1.0);
        assert!(rl_integral(2.0, &one).is_err());
    }

    #[test]
    fn l1_of_constant_vanishes() {
        let g = TimeGrid::uniform(1.0, 16).unwrap();
        let c = SampledSignal::from_fn(&g, |_| 3.0);
        assert!(caputo_l1(0.4, &c).unwrap().values.iter().all(|v| *v == 0.0));
        assert!(caputo_l1(1.0, &c).is_err());
    }

    #[test]
    fn seminorm_precondition() {
        let g = TimeGrid::uniform(1.0, 16).unwrap();
        let c = SampledSignal::from_fn(&g, |_| 1.0);
        assert!(matches!(halpha_seminorm(0.5, &c), Err(Error::Precondition(_))));
        let z = SampledSignal::from_fn(&g, |_| 0.0);
        assert_eq!(halpha_seminorm(0.5, &z).unwrap(), 0.0);
    }
}
