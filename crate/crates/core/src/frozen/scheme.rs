use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use dashmap::DashMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cell::{cell_end, solve_cell, CellKind, CellMesh, CellSolution};
use super::freeze::{FrozenCell, FrozenData};
use crate::error::{budget, parameter, Result};
use crate::model::ProblemData;
use crate::path_space::{Skeleton, TIME_EPS};
use crate::rbsde::{solve_lsmc_with, LsmcOptions, Penalty, PenaltyScheme};
use crate::simulate::{euler_bundle_from_state, ControlPolicy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchemeOptions {
    /// Cells at this depth take their value from the regression solver on
    /// frozen data instead of a finite-difference solve.
    pub depth_cap: usize,
    /// Boundary samples per lateral side.
    pub n_lat: usize,
    /// Boundary samples on the top row (corners included).
    pub n_term: usize,
    pub mesh: CellMesh,
    pub mc_paths: usize,
    pub mc_dt: f64,
    pub seed: u64,
    /// Cap on finite-difference plus regression solves per scheme.
    pub budget: usize,
}

impl Default for SchemeOptions {
    fn default() -> Self {
        Self {
            depth_cap: 2,
            n_lat: 6,
            n_term: 5,
            mesh: CellMesh::default(),
            mc_paths: 1000,
            mc_dt: 0.025,
            seed: 7,
            budget: 20_000,
        }
    }
}

impl SchemeOptions {
    pub fn check(&self) -> Result<()> {
        self.mesh.check()?;
        if self.n_lat == 0 || self.n_term < 2 {
            return Err(parameter("need at least one lateral sample and two top samples"));
        }
        if self.mc_paths < 2 || !(self.mc_dt > 0.0) {
            return Err(parameter("regression fallback needs ≥ 2 paths and a positive step"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct MemoKey {
    depth: u32,
    t: i64,
    pos: i64,
    run_max: i64,
    run_min: i64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SchemeCounters {
    pub fd_solves: usize,
    pub mc_solves: usize,
    pub memo_hits: usize,
}

/// Recursive evaluation of `θ^{m,α}_n(π_n; t_n, 0)` or `Γ^α_n(π_n; t_n, 0)`.
/// Boundary values of a cell come from the cells rooted at its boundary
/// points, memoized on quantized skeletons (first write wins).
pub struct FrozenScheme<'a> {
    pub data: &'a ProblemData,
    pub alpha: f64,
    pub kind: CellKind,
    opts: SchemeOptions,
    memo: DashMap<MemoKey, f64>,
    fd: AtomicUsize,
    mc: AtomicUsize,
    hits: AtomicUsize,
}

impl<'a> FrozenScheme<'a> {
    pub fn new(data: &'a ProblemData, alpha: f64, kind: CellKind, opts: &SchemeOptions) -> Result<Self> {
        data.require_dim(1)?;
        opts.check()?;
        if !(alpha > 0.0) {
            return Err(parameter("cascade level must be positive"));
        }
        let mut opts = opts.clone();
        // Lateral samples sit at half-steps of the sample spacing, which
        // must be grid times.
        opts.mesh.nt_multiple = 2 * opts.n_lat;
        Ok(Self {
            data,
            alpha,
            kind,
            opts,
            memo: DashMap::new(),
            fd: AtomicUsize::new(0),
            mc: AtomicUsize::new(0),
            hits: AtomicUsize::new(0),
        })
    }

    pub fn counters(&self) -> SchemeCounters {
        SchemeCounters {
            fd_solves: self.fd.load(Ordering::Relaxed),
            mc_solves: self.mc.load(Ordering::Relaxed),
            memo_hits: self.hits.load(Ordering::Relaxed),
        }
    }

    fn dx(&self) -> f64 {
        self.alpha / self.opts.mesh.j_half as f64
    }

    fn key(&self, pi: &Skeleton, depth: usize) -> MemoKey {
        let st = pi.hat().state_at(pi.last_time());
        let q = |v: f64| (v / self.dx()).round() as i64;
        let (run_max, run_min) = if self.data.path_dependent { (q(st.run_max[0]), q(st.run_min[0])) } else { (0, 0) };
        MemoKey {
            depth: depth as u32,
            t: (pi.last_time() / TIME_EPS).round() as i64,
            pos: q(st.x[0]),
            run_max,
            run_min,
        }
    }

    fn charge(&self) -> Result<()> {
        let used = self.fd.load(Ordering::Relaxed) + self.mc.load(Ordering::Relaxed);
        if used >= self.opts.budget {
            return Err(budget(format!("frozen scheme used its budget of {} cell solves", self.opts.budget)));
        }
        Ok(())
    }

    /// Value at the root `(t_n, 0)` of the cell with prefix `pi`, `depth`
    /// levels below the starting cell.
    pub fn value(&self, pi: &Skeleton, depth: usize) -> Result<f64> {
        let t_n = pi.last_time();
        if t_n >= self.data.horizon - TIME_EPS {
            return Ok(self.data.xi(&pi.hat().state_at(self.data.horizon)));
        }
        let key = self.key(pi, depth);
        if let Some(v) = self.memo.get(&key) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return Ok(*v);
        }
        // Solve on the key's knot time so equal keys give equal values.
        let mut pi = pi.clone();
        *pi.times.last_mut().expect("skeleton has a root") = key.t as f64 * TIME_EPS;
        let v = if depth >= self.opts.depth_cap {
            self.regression_value(&pi, &key)?
        } else {
            self.solve(&pi, depth, false)?.root
        };
        Ok(*self.memo.entry(key).or_insert(v))
    }

    /// Finite-difference solve of the cell rooted at `pi` with boundary
    /// values from the cells one level down.
    pub fn solve(&self, pi: &Skeleton, depth: usize, keep: bool) -> Result<CellSolution> {
        self.charge()?;
        self.fd.fetch_add(1, Ordering::Relaxed);
        let cell = FrozenCell::new(pi.clone(), self.alpha)?;
        let boundary = self.boundary(&cell, depth)?;
        solve_cell(self.data, &cell, self.kind, &self.opts.mesh, &|t, x| boundary.eval(t, x), keep)
    }

    /// Boundary points of the cell: `(time, offset)` on the lateral sides
    /// and the top row.
    pub fn boundary_points(&self, cell: &FrozenCell) -> (Vec<f64>, Vec<f64>) {
        let t_n = cell.t_n();
        let dur = cell_end(cell, self.data.horizon) - t_n;
        let lat = (0..self.opts.n_lat).map(|j| t_n + (j as f64 + 0.5) * dur / self.opts.n_lat as f64).collect();
        let jh = self.opts.mesh.j_half as f64;
        let nt = self.opts.n_term - 1;
        let top = (0..=nt)
            .map(|k| {
                let j = (2.0 * jh * k as f64 / nt as f64).round();
                -self.alpha + j * self.dx()
            })
            .collect();
        (lat, top)
    }

    fn boundary(&self, cell: &FrozenCell, depth: usize) -> Result<Boundary> {
        let t_end = cell_end(cell, self.data.horizon);
        let (lat, top) = self.boundary_points(cell);
        let mut points: Vec<(f64, f64)> = Vec::new();
        for &s in &lat {
            points.push((s, -self.alpha));
            points.push((s, self.alpha));
        }
        let at_horizon = t_end >= self.data.horizon - TIME_EPS;
        if !at_horizon {
            points.extend(top.iter().map(|&x| (t_end, x)));
        }
        let vals = points
            .par_iter()
            .map(|&(t, x)| self.value(&cell.pi.extended(t, &[x]), depth + 1))
            .collect::<Result<Vec<f64>>>()?;
        let nl = lat.len();
        let left: Vec<f64> = (0..nl).map(|j| vals[2 * j]).collect();
        let right: Vec<f64> = (0..nl).map(|j| vals[2 * j + 1]).collect();
        let top_vals = if at_horizon { Vec::new() } else { vals[2 * nl..].to_vec() };
        let terminal = at_horizon.then(|| {
            let pi = cell.pi.clone();
            let data = self.data.clone();
            Box::new(move |x: f64| data.xi(&pi.extended(data.horizon, &[x]).hat().state_at(data.horizon)))
                as Box<dyn Fn(f64) -> f64 + Send + Sync>
        });
        Ok(Boundary { alpha: self.alpha, t_end, lat, left, right, top, top_vals, terminal })
    }

    fn regression_value(&self, pi: &Skeleton, key: &MemoKey) -> Result<f64> {
        self.charge()?;
        self.mc.fetch_add(1, Ordering::Relaxed);
        let cell = FrozenCell::new(pi.clone(), self.alpha)?;
        let base = cell.anchor_state();
        let left = self.data.horizon - base.t;
        let n_steps = ((left / self.opts.mc_dt) - 1e-9).ceil().max(1.0) as usize;
        let seed = splitmix(self.opts.seed ^ splitmix(key_bits(key)));
        let penalty = match self.kind {
            CellKind::Penalized { m } => Some(Penalty { m, scheme: PenaltyScheme::Implicit }),
            CellKind::Obstacle => None,
        };
        let lsmc = LsmcOptions { penalty, ..LsmcOptions::default() };
        let mut best = f64::NEG_INFINITY;
        for k in 0..self.data.controls.len() {
            let policy = ControlPolicy::constant(k);
            let bundle = euler_bundle_from_state(self.data, &base, &policy, n_steps, self.opts.mc_paths, seed, true)?;
            let fd = FrozenData::new(self.data, &cell, &bundle)?;
            best = best.max(solve_lsmc_with(&fd, self.data, &bundle, &lsmc)?.y0);
        }
        Ok(best)
    }
}

/// Sampled boundary data of one cell, interpolated linearly.
struct Boundary {
    alpha: f64,
    t_end: f64,
    lat: Vec<f64>,
    left: Vec<f64>,
    right: Vec<f64>,
    top: Vec<f64>,
    top_vals: Vec<f64>,
    terminal: Option<Box<dyn Fn(f64) -> f64 + Send + Sync>>,
}

impl Boundary {
    fn top_at(&self, x: f64) -> f64 {
        if let Some(f) = &self.terminal {
            return f(x);
        }
        interp(&self.top, &self.top_vals, x)
    }

    fn eval(&self, t: f64, x: f64) -> f64 {
        if t >= self.t_end - TIME_EPS {
            return self.top_at(x);
        }
        let side = if x < 0.0 { &self.left } else { &self.right };
        let corner = self.top_at(if x < 0.0 { -self.alpha } else { self.alpha });
        let mut ts = self.lat.clone();
        ts.push(self.t_end);
        let mut vs = side.clone();
        vs.push(corner);
        interp(&ts, &vs, t)
    }
}

/// Piecewise-linear interpolation through `(xs, vs)`, constant outside.
/// Nodes within `TIME_EPS` of a sample return the sample exactly.
fn interp(xs: &[f64], vs: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if x <= xs[0] + TIME_EPS {
        return vs[0];
    }
    if x >= xs[n - 1] - TIME_EPS {
        return vs[n - 1];
    }
    let j = xs.partition_point(|&s| s <= x);
    if (x - xs[j - 1]).abs() <= TIME_EPS {
        return vs[j - 1];
    }
    if (xs[j] - x).abs() <= TIME_EPS {
        return vs[j];
    }
    let w = (x - xs[j - 1]) / (xs[j] - xs[j - 1]);
    vs[j - 1] + w * (vs[j] - vs[j - 1])
}

fn key_bits(k: &MemoKey) -> u64 {
    [k.depth as i64, k.t, k.pos, k.run_max, k.run_min].iter().fold(0u64, |acc, v| splitmix(acc ^ *v as u64))
}

fn splitmix(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// `Σ_{n < ⌈T/α⌉} α/2ⁿ`: the accumulated boundary offsets of the cascade.
pub fn correction(alpha: f64, horizon: f64) -> f64 {
    let cells = (horizon / alpha - 1e-9).ceil().max(1.0) as i32;
    (0..cells).map(|n| alpha / 2f64.powi(n)).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeReport {
    pub alpha: f64,
    pub m: f64,
    pub depth_cap: usize,
    pub theta0: f64,
    pub gamma0: f64,
    pub rho0_alpha: f64,
    pub correction: f64,
    pub psi0: f64,
    pub phi0: f64,
    pub gap: f64,
    pub theta_counters: SchemeCounters,
    pub gamma_counters: SchemeCounters,
    pub runtime_s: f64,
}

/// `psi0 = θ0 − ρ0(α) − corr` and `phi0 = Γ0 + ρ0(α) + corr` at `(0, 0)`.
pub fn envelope_values(data: &ProblemData, alpha: f64, m: f64, opts: &SchemeOptions) -> Result<EnvelopeReport> {
    let start = Instant::now();
    let root = Skeleton::root(0.0, 1);
    let theta = FrozenScheme::new(data, alpha, CellKind::Penalized { m }, opts)?;
    let gamma = FrozenScheme::new(data, alpha, CellKind::Obstacle, opts)?;
    let (th, ga) = rayon::join(|| theta.value(&root, 0), || gamma.value(&root, 0));
    let (theta0, gamma0) = (th?, ga?);
    let rho = data.rho0.eval(alpha);
    let corr = correction(alpha, data.horizon);
    let psi0 = theta0 - rho - corr;
    let phi0 = gamma0 + rho + corr;
    Ok(EnvelopeReport {
        alpha,
        m,
        depth_cap: opts.depth_cap,
        theta0,
        gamma0,
        rho0_alpha: rho,
        correction: corr,
        psi0,
        phi0,
        gap: phi0 - psi0,
        theta_counters: theta.counters(),
        gamma_counters: gamma.counters(),
        runtime_s: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SandwichOptions {
    pub alphas: Vec<f64>,
    pub m: f64,
    /// Finite-difference and fallback tolerance added to the solver
    /// interval.
    pub fd_tol: f64,
    pub scheme: SchemeOptions,
}

impl Default for SandwichOptions {
    fn default() -> Self {
        Self { alphas: vec![0.4, 0.2, 0.1], m: 256.0, fd_tol: 1e-2, scheme: SchemeOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SandwichReport {
    pub instance: String,
    pub u0: f64,
    pub u0_tol: f64,
    pub slack: f64,
    pub rows: Vec<EnvelopeReport>,
    /// `psi0 − slack ≤ u0 ≤ phi0 + slack` for every level.
    pub holds: bool,
    pub gaps_nonincreasing: bool,
    pub runtime_s: f64,
}

/// Envelopes over the α list, checked against a solver estimate of `u⁰`
/// with tolerance `u0_tol`.
pub fn sandwich_check(data: &ProblemData, u0: f64, u0_tol: f64, opts: &SandwichOptions) -> Result<SandwichReport> {
    let start = Instant::now();
    if opts.alphas.is_empty() {
        return Err(parameter("sandwich needs at least one level"));
    }
    let rows =
        opts.alphas.iter().map(|&a| envelope_values(data, a, opts.m, &opts.scheme)).collect::<Result<Vec<_>>>()?;
    let slack = u0_tol + opts.fd_tol;
    let holds = rows.iter().all(|r| r.psi0 - slack <= u0 && u0 <= r.phi0 + slack);
    let mut sorted: Vec<&EnvelopeReport> = rows.iter().collect();
    sorted.sort_by(|a, b| b.alpha.total_cmp(&a.alpha));
    let gaps_nonincreasing = sorted.windows(2).all(|w| w[1].gap <= w[0].gap + opts.fd_tol);
    Ok(SandwichReport {
        instance: data.name.clone(),
        u0,
        u0_tol,
        slack,
        rows,
        holds,
        gaps_nonincreasing,
        runtime_s: start.elapsed().as_secs_f64(),
    })
}
