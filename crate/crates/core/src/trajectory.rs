use crate::fracops::TimeGrid;
use crate::spectral::Field;
use std::fmt::Write as _;

/// Solver provenance attached to a trajectory.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrajectoryMeta {
    pub solver: String,
    pub iterations: usize,
    pub residual: f64,
    /// per-sweep contraction ratios, when the solver iterates globally
    pub ratios: Vec<f64>,
    pub notes: Vec<(String, String)>,
}

/// Fields `u(·, t_i)` at every node of a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: TimeGrid,
    pub x: Vec<f64>,
    pub states: Vec<Field>,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    pub fn new(grid: TimeGrid, x: Vec<f64>, states: Vec<Field>, solver: &str) -> Self {
        Trajectory {
            grid,
            x,
            states,
            meta: TrajectoryMeta { solver: solver.to_string(), ..Default::default() },
        }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn last(&self) -> &Field {
        self.states.last().expect("trajectory has at least the initial state")
    }

    pub fn min(&self) -> f64 {
        self.states.iter().flatten().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.states.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `max_{i,x} |self - other|`
    pub fn sup_distance(&self, other: &Trajectory) -> f64 {
        self.states
            .iter()
            .zip(&other.states)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(p, q)| (p - q).abs()))
            .fold(0.0, f64::max)
    }

    /// `min_{i,x} (self - other)`
    pub fn min_gap(&self, other: &Trajectory) -> f64 {
        self.states
            .iter()
            .zip(&other.states)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(p, q)| p - q))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn map(&self, f: impl Fn(f64, f64, f64) -> f64) -> Trajectory {
        let states = self
            .states
            .iter()
            .zip(self.grid.nodes())
            .map(|(u, &t)| u.iter().zip(&self.x).map(|(&v, &x)| f(x, t, v)).collect())
            .collect();
        Trajectory { states, ..self.clone() }
    }

    /// CSV with header `t,x_0,…` and one row per time node.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t");
        for i in 0..self.x.len() {
            let _ = write!(s, ",x_{i}");
        }
        s.push('\n');
        for (t, u) in self.grid.nodes().iter().zip(&self.states) {
            let _ = write!(s, "{t:.17e}");
            for v in u {
                let _ = write!(s, ",{v:.17e}");
            }
            s.push('\n');
        }
        s
    }
}
