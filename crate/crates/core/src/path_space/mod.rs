//! Discrete canonical space: sampled paths, path surgery, the sup-metric on
//! stopped paths, and the hitting-time constructions used to localize in
//! time (`hitting_time_delta`) and to freeze data cell by cell
//! (`level_cascade`).

mod hitting;
mod path;
mod skeleton;

pub use hitting::{hitting_time_delta, level_cascade, LevelCascade};
pub use path::{concat, dist_dinfty, shift, stop, DiscretePath, PathPoint};
pub use skeleton::{hat_knots, interpolate_hat_path, KnotPath, Skeleton};

use smallvec::SmallVec;

/// Tolerance used when comparing times and levels that come out of grid
/// arithmetic.
pub const TIME_EPS: f64 = 1e-9;

pub(crate) type Coords = SmallVec<[f64; 4]>;

/// Summary of a stopped path `(t, ω_{·∧t})` as seen by the data functionals:
/// current value plus running extrema of every coordinate.
///
/// All built-in barriers, terminal payoffs and drivers depend on the path
/// only through these features.
#[derive(Debug, Clone, PartialEq)]
pub struct PathState {
    pub t: f64,
    pub x: Coords,
    pub run_max: Coords,
    pub run_min: Coords,
}

impl PathState {
    /// State of the constant-zero path at time `t`.
    pub fn origin(t: f64, dim: usize) -> Self {
        let zero: Coords = smallvec::smallvec![0.0; dim];
        Self { t, x: zero.clone(), run_max: zero.clone(), run_min: zero }
    }

    /// One-dimensional state with explicit running extrema.
    pub fn scalar(t: f64, x: f64, run_max: f64, run_min: f64) -> Self {
        Self {
            t,
            x: smallvec::smallvec![x],
            run_max: smallvec::smallvec![run_max.max(x)],
            run_min: smallvec::smallvec![run_min.min(x)],
        }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    /// First coordinate of the current value.
    #[inline]
    pub fn x1(&self) -> f64 {
        self.x[0]
    }

    pub fn norm(&self) -> f64 {
        self.x.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// State after moving (in a straight line) by `dx` to time `t`.
    ///
    /// Running extrema only see the endpoint, which is exact for a straight
    /// segment.
    pub fn advanced(&self, t: f64, dx: &[f64]) -> Self {
        let mut next = self.clone();
        next.t = t;
        for c in 0..self.dim() {
            let v = self.x[c] + dx[c];
            next.x[c] = v;
            next.run_max[c] = self.run_max[c].max(v);
            next.run_min[c] = self.run_min[c].min(v);
        }
        next
    }
}

pub(crate) fn euclid(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}
