use rayon::prelude::*;
use serde::Serialize;

use crate::error::{domain, Result};
use crate::model::ProblemData;
use crate::path_space::{hat_knots, DiscretePath, KnotPath, LevelCascade, PathState, Skeleton, TIME_EPS};
use crate::rbsde::PathData;
use crate::simulate::PathBundle;

/// A level-cascade cell: the prefix `π_n` and the level `α`. The cell is the
/// cylinder `[t_n, (t_n + α) ∧ T) × (−α, α)` around the last knot.
#[derive(Debug, Clone, PartialEq)]
pub struct FrozenCell {
    pub pi: Skeleton,
    pub alpha: f64,
}

impl FrozenCell {
    pub fn new(pi: Skeleton, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(domain("cell level must be positive"));
        }
        for w in pi.times.windows(2) {
            if w[1] < w[0] - TIME_EPS || w[1] - w[0] > alpha + TIME_EPS {
                return Err(domain(format!("knot times {} → {} break the cell spacing", w[0], w[1])));
            }
        }
        if pi.increments.iter().any(|x| crate::path_space::euclid(x) > alpha + 1e-9) {
            return Err(domain("a knot increment lies outside the closed ball of radius α"));
        }
        Ok(Self { pi, alpha })
    }

    pub fn t_n(&self) -> f64 {
        self.pi.last_time()
    }

    /// `(t_n, π̂_n)` as seen by the data.
    pub fn anchor_state(&self) -> PathState {
        self.pi.hat().state_at(self.t_n())
    }
}

/// Data of one path held constant between cascade knots: before `ch_0` the
/// state at `(t_n, π̂_n)`, then the hat path stopped at each knot.
#[derive(Debug, Clone)]
pub struct FrozenPath {
    pub knots: KnotPath,
    pub cascade: LevelCascade,
    times: Vec<f64>,
    states: Vec<PathState>,
    terminal: PathState,
}

impl FrozenPath {
    /// Index of the state in force at time `s`.
    pub fn active(&self, s: f64) -> usize {
        self.times.partition_point(|k| *k <= s + TIME_EPS).max(1) - 1
    }

    /// Index of the state in force just before `s` (the left limit).
    pub fn active_before(&self, s: f64) -> usize {
        self.times.partition_point(|k| *k < s - TIME_EPS).max(1) - 1
    }

    pub fn state(&self, s: f64) -> &PathState {
        &self.states[self.active(s)]
    }

    pub fn f(&self, data: &ProblemData, s: f64, y: f64, sz: &[f64], k: usize) -> f64 {
        data.f(self.state(s), y, sz, k)
    }

    pub fn h(&self, data: &ProblemData, s: f64) -> f64 {
        data.h(self.state(s))
    }

    pub fn xi(&self, data: &ProblemData) -> f64 {
        data.xi(&self.terminal)
    }
}

/// Frozen evaluators `(F̂, ĥ, ξ̂)` for a start at `(t, x)` in the cell, along
/// the continuation `path` (starting at `t`, ending at the horizon).
pub fn freeze_data(cell: &FrozenCell, t: f64, x: &[f64], path: &DiscretePath) -> Result<FrozenPath> {
    let (knots, cascade) = hat_knots(&cell.pi, t, x, cell.alpha, path)?;
    let mut times = vec![cell.t_n()];
    let mut states = vec![cell.anchor_state()];
    for s in &cascade.times {
        if *s > times[times.len() - 1] + TIME_EPS {
            times.push(*s);
            states.push(knots.state_at(*s));
        }
    }
    let terminal = knots.state_at(path.end_time());
    Ok(FrozenPath { knots, cascade, times, states, terminal })
}

/// Frozen data along every path of a bundle started at the cell root
/// `(t_n, 0)`, for regression replays.
///
/// The frozen barrier jumps at cascade knots, which are hitting times and so
/// known when they happen. Step `i` reads the barrier as its left limit at
/// `t_i` and the driver from the state in force on `[t_i, t_{i+1})`; a jump
/// at a knot is then reflected at the knot's own step.
pub struct FrozenData<'a> {
    pub data: &'a ProblemData,
    pub paths: Vec<FrozenPath>,
    /// `active[p][i]`: frozen state index in force at step `i`.
    active: Vec<Vec<u32>>,
    /// Same, just before step `i`.
    before: Vec<Vec<u32>>,
    /// Every knot is a grid time.
    aligned: bool,
}

impl<'a> FrozenData<'a> {
    pub fn new(data: &'a ProblemData, cell: &FrozenCell, bundle: &PathBundle) -> Result<Self> {
        data.require_dim(1)?;
        if (bundle.t0 - cell.t_n()).abs() > TIME_EPS {
            return Err(domain("the bundle must start at the last knot of the cell"));
        }
        let zero = vec![0.0; bundle.dim];
        let paths = (0..bundle.n_paths)
            .into_par_iter()
            .map(|p| freeze_data(cell, bundle.t0, &zero, &bundle.path(p)))
            .collect::<Result<Vec<_>>>()?;
        let active = paths
            .par_iter()
            .map(|fp| (0..=bundle.n_steps).map(|i| fp.active(bundle.time(i)) as u32).collect())
            .collect();
        let before = paths
            .par_iter()
            .map(|fp| (0..=bundle.n_steps).map(|i| fp.active_before(bundle.time(i)) as u32).collect())
            .collect();
        let on_grid = |s: f64| {
            let r = (s - bundle.t0) / bundle.dt.max(f64::MIN_POSITIVE);
            (r - r.round()).abs() * bundle.dt <= TIME_EPS
        };
        let aligned = bundle.n_steps > 0 && paths.iter().all(|fp| fp.times.iter().all(|&s| on_grid(s)));
        Ok(Self { data, paths, active, before, aligned })
    }

    pub fn cascades(&self) -> Vec<LevelCascade> {
        self.paths.iter().map(|p| p.cascade.clone()).collect()
    }

    #[inline]
    fn st(&self, p: usize, i: usize) -> &PathState {
        &self.paths[p].states[self.active[p][i] as usize]
    }
}

impl PathData for FrozenData<'_> {
    fn barrier(&self, p: usize, i: usize) -> f64 {
        self.data.h(&self.paths[p].states[self.before[p][i] as usize])
    }

    fn terminal(&self, p: usize) -> f64 {
        self.paths[p].xi(self.data)
    }

    fn driver(&self, p: usize, i: usize, y: f64, sz: &[f64], k: usize) -> f64 {
        self.data.f(self.st(p, i), y, sz, k)
    }

    fn lipschitz(&self) -> f64 {
        self.data.l0
    }

    /// Markovian data freeze to functions of the last knot, so extrema
    /// features would only add regression noise.
    fn path_dependent(&self) -> bool {
        self.data.path_dependent
    }

    /// The frozen state is part of the Markov state of the replay.
    fn n_extra(&self) -> usize {
        if self.data.path_dependent {
            4
        } else {
            2
        }
    }

    /// With knots on the grid the barrier at step `i + 1` is its left limit,
    /// the barrier in force on `[t_i, t_{i+1})`, so it is known at step `i`
    /// and bounds the next value from below.
    fn target_offset(&self, p: usize, i: usize) -> Option<f64> {
        self.aligned.then(|| self.data.h(self.st(p, i)))
    }

    fn extra_features(&self, p: usize, i: usize, out: &mut [f64]) {
        let st = self.st(p, i);
        out[0] = st.t;
        out[1] = st.x[0];
        if out.len() == 4 {
            out[2] = st.run_max[0];
            out[3] = st.run_min[0];
        }
    }
}

/// Largest observed distance between frozen and original data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviationReport {
    pub alpha: f64,
    pub probes: usize,
    pub max_driver: f64,
    pub max_barrier: f64,
    pub max_terminal: f64,
    /// `ρ0(2α)`.
    pub bound: f64,
}

impl DeviationReport {
    pub fn within(&self, tol: f64) -> bool {
        self.max_driver.max(self.max_barrier).max(self.max_terminal) <= self.bound + tol
    }
}

/// Compares `(F̂, ĥ, ξ̂)` with `(F, h, ξ)` along the paths of a bundle
/// started at the root of `cell`, at every grid time.
pub fn frozen_deviation(data: &ProblemData, cell: &FrozenCell, bundle: &PathBundle) -> Result<DeviationReport> {
    let fd = FrozenData::new(data, cell, bundle)?;
    let prefix = cell.anchor_state();
    let d = bundle.dim;
    let zero = vec![0.0; d];
    let rows: Vec<(f64, f64, f64)> = (0..bundle.n_paths)
        .into_par_iter()
        .map(|p| {
            let (mut df, mut dh) = (0.0f64, 0.0f64);
            // Original path: the prefix hat, then the anchor position plus
            // the bundle displacement.
            let mut st = prefix.clone();
            for i in 0..=bundle.n_steps {
                st.t = bundle.time(i);
                let disp = bundle.disp(p, i);
                for c in 0..d {
                    let v = prefix.x[c] + disp[c];
                    st.x[c] = v;
                    st.run_max[c] = st.run_max[c].max(v);
                    st.run_min[c] = st.run_min[c].min(v);
                }
                let fz = fd.st(p, i);
                dh = dh.max((data.h(&st) - data.h(fz)).abs());
                for k in 0..data.controls.len() {
                    for y in [-1.0, 0.0, 1.0] {
                        df = df.max((data.f(&st, y, &zero, k) - data.f(fz, y, &zero, k)).abs());
                    }
                }
            }
            let dxi = (data.xi(&st) - fd.terminal(p)).abs();
            (df, dh, dxi)
        })
        .collect();
    let fold = |g: fn(&(f64, f64, f64)) -> f64| rows.iter().map(g).fold(0.0, f64::max);
    Ok(DeviationReport {
        alpha: cell.alpha,
        probes: bundle.n_paths * (bundle.n_steps + 1),
        max_driver: fold(|r| r.0),
        max_barrier: fold(|r| r.1),
        max_terminal: fold(|r| r.2),
        bound: data.rho0.eval(2.0 * cell.alpha),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ProblemSpec;
    use crate::simulate::{euler_bundle_from_state, ControlPolicy};

    fn bundle(d: &ProblemData, paths: usize) -> PathBundle {
        euler_bundle_from_state(d, &PathState::origin(0.0, 1), &ControlPolicy::constant(0), 200, paths, 5, true)
            .unwrap()
    }

    #[test]
    fn zero_path_freezes_root_data() {
        let cell = FrozenCell::new(Skeleton::root(0.0, 1), 0.25).unwrap();
        let path = DiscretePath::zeros(0.0, 0.01, 100, 1);
        let fp = freeze_data(&cell, 0.0, &[0.0], &path).unwrap();
        // Cascade times 0.25, 0.5, 0.75, 1.0 all at value zero.
        assert_eq!(fp.cascade.len(), 4);
        for s in [0.0, 0.1, 0.3, 0.99] {
            assert_eq!(fp.state(s).x[0], 0.0);
        }
        assert_eq!(fp.state(0.1).t, 0.0);
        assert!((fp.state(0.3).t - 0.25).abs() < 1e-12);
    }

    #[test]
    fn markovian_constant_data_are_unchanged() {
        let d = ProblemSpec::preset("linear-terminal").unwrap().build().unwrap();
        let cell = FrozenCell::new(Skeleton::root(0.0, 1), 0.2).unwrap();
        let b = bundle(&d, 50);
        let r = frozen_deviation(&d, &cell, &b).unwrap();
        assert_eq!(r.max_barrier, 0.0);
        assert_eq!(r.max_driver, 0.0);
    }

    #[test]
    fn abs_deviation_within_modulus() {
        let d = ProblemSpec::preset("abs-stopping").unwrap().build().unwrap();
        for alpha in [0.4, 0.2, 0.1] {
            let cell = FrozenCell::new(Skeleton::root(0.0, 1), alpha).unwrap();
            let r = frozen_deviation(&d, &cell, &bundle(&d, 200)).unwrap();
            assert!(r.within(1e-9), "{r:?}");
            assert!(r.max_barrier > 0.0);
        }
    }

    #[test]
    fn invalid_cells_are_rejected() {
        let pi = Skeleton::root(0.0, 1).extended(0.5, &[0.1]);
        assert!(FrozenCell::new(pi.clone(), 0.2).is_err());
        assert!(FrozenCell::new(pi, 0.6).is_ok());
        let far = Skeleton::root(0.0, 1).extended(0.1, &[0.5]);
        assert!(FrozenCell::new(far, 0.2).is_err());
    }
}
