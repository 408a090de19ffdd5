use super::{level_cascade, Coords, DiscretePath, LevelCascade, PathState, TIME_EPS};
use crate::error::{domain, Result};

/// The prefix `π_n = (t_i, x_i)_{i ≤ n}` of a cascade: knot times and the
/// increments of the path between consecutive knots. The first entry is the
/// root `(t_0, 0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Skeleton {
    pub times: Vec<f64>,
    pub increments: Vec<Vec<f64>>,
}

impl Skeleton {
    pub fn root(t0: f64, dim: usize) -> Self {
        Self { times: vec![t0], increments: vec![vec![0.0; dim]] }
    }

    pub fn dim(&self) -> usize {
        self.increments[0].len()
    }

    /// Index `n` of the last knot.
    pub fn depth(&self) -> usize {
        self.times.len() - 1
    }

    pub fn last_time(&self) -> f64 {
        *self.times.last().expect("skeleton has a root")
    }

    /// Position `Σ_{j ≤ n} x_j` of the last knot.
    pub fn position(&self) -> Vec<f64> {
        let mut pos = vec![0.0; self.dim()];
        for inc in &self.increments {
            for (p, v) in pos.iter_mut().zip(inc) {
                *p += v;
            }
        }
        pos
    }

    /// `π_n^{(t,x)}`: the prefix extended by the knot `(t, x)`.
    pub fn extended(&self, t: f64, x: &[f64]) -> Self {
        let mut next = self.clone();
        next.times.push(t);
        next.increments.push(x.to_vec());
        next
    }

    /// The linear interpolation `π̂_n` through the knots, extended constantly.
    pub fn hat(&self) -> KnotPath {
        let mut kp = KnotPath::new(self.dim());
        let mut pos = vec![0.0; self.dim()];
        for (t, inc) in self.times.iter().zip(&self.increments) {
            for (p, v) in pos.iter_mut().zip(inc) {
                *p += v;
            }
            kp.push(*t, &pos);
        }
        kp
    }
}

/// Piecewise-linear path through `(time, value)` knots, constant outside the
/// knot span.
#[derive(Debug, Clone, PartialEq)]
pub struct KnotPath {
    dim: usize,
    times: Vec<f64>,
    values: Vec<Vec<f64>>,
}

impl KnotPath {
    pub fn new(dim: usize) -> Self {
        Self { dim, times: Vec::new(), values: Vec::new() }
    }

    /// Appends a knot. A knot at the same time as the previous one replaces
    /// its value (the path is continuous).
    pub fn push(&mut self, t: f64, value: &[f64]) {
        if let Some(&last) = self.times.last() {
            if (t - last).abs() <= TIME_EPS {
                *self.values.last_mut().unwrap() = value.to_vec();
                return;
            }
            debug_assert!(t > last, "knots must be increasing");
        }
        self.times.push(t);
        self.values.push(value.to_vec());
    }

    pub fn knot_times(&self) -> &[f64] {
        &self.times
    }

    pub fn knot_values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn eval(&self, t: f64, out: &mut [f64]) {
        let n = self.times.len();
        if n == 0 {
            out.iter_mut().for_each(|v| *v = 0.0);
            return;
        }
        if t <= self.times[0] {
            out.copy_from_slice(&self.values[0]);
            return;
        }
        if t >= self.times[n - 1] {
            out.copy_from_slice(&self.values[n - 1]);
            return;
        }
        let j = self.times.partition_point(|&s| s <= t);
        let (t0, t1) = (self.times[j - 1], self.times[j]);
        let w = (t - t0) / (t1 - t0);
        for c in 0..self.dim {
            out[c] = self.values[j - 1][c] + w * (self.values[j][c] - self.values[j - 1][c]);
        }
    }

    /// Features of the stopped path at `t`. Extrema of a piecewise-linear
    /// path sit at knots, so this is exact.
    pub fn state_at(&self, t: f64) -> PathState {
        let mut cur = vec![0.0; self.dim];
        self.eval(t, &mut cur);
        let mut st = PathState::origin(t, self.dim);
        st.x = Coords::from_slice(&cur);
        for c in 0..self.dim {
            st.run_max[c] = cur[c];
            st.run_min[c] = cur[c];
        }
        for (s, v) in self.times.iter().zip(&self.values) {
            if *s > t + TIME_EPS {
                break;
            }
            for c in 0..self.dim {
                st.run_max[c] = st.run_max[c].max(v[c]);
                st.run_min[c] = st.run_min[c].min(v[c]);
            }
        }
        st
    }

    /// Samples the path on the grid `t0 + i·dt`, `i = 0..=n_steps`.
    pub fn sample(&self, t0: f64, dt: f64, n_steps: usize) -> Result<DiscretePath> {
        let mut values = vec![0.0; (n_steps + 1) * self.dim];
        for i in 0..=n_steps {
            self.eval(t0 + i as f64 * dt, &mut values[i * self.dim..(i + 1) * self.dim]);
        }
        DiscretePath::new(t0, dt, self.dim, values)
    }
}

/// Knots of `ω̂^{π_n,t,x,α}`: the prefix knots, then the cascade knots
/// `(ch_i, Σ x_j + x + B_{ch_i})` generated from `(t, x)`.
pub fn hat_knots(
    pi: &Skeleton,
    t: f64,
    x: &[f64],
    alpha: f64,
    path: &DiscretePath,
) -> Result<(KnotPath, LevelCascade)> {
    let horizon = path.end_time();
    let cascade = level_cascade(t, x, alpha, path, pi.last_time(), horizon)?;
    let mut kp = pi.hat();
    let mut pos = pi.position();
    for (s, inc) in cascade.times.iter().zip(&cascade.increments) {
        for (p, v) in pos.iter_mut().zip(inc) {
            *p += v;
        }
        if *s > pi.last_time() + TIME_EPS {
            kp.push(*s, &pos);
        }
    }
    Ok((kp, cascade))
}

/// Samples `ω̂^{π_n,t,x,α}` on the grid of `path` extended back to the root
/// of `pi`. The continuation `path` starts at `t` and runs to the horizon.
pub fn interpolate_hat_path(pi: &Skeleton, t: f64, x: &[f64], alpha: f64, path: &DiscretePath) -> Result<DiscretePath> {
    if pi.dim() != path.dim() {
        return Err(domain("skeleton and path differ in dimension"));
    }
    let (kp, _) = hat_knots(pi, t, x, alpha, path)?;
    let t0 = pi.times[0];
    let n = ((path.end_time() - t0) / path.dt()).round() as usize;
    kp.sample(t0, path.dt(), n)
}
