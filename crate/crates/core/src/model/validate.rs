use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::data::ProblemData;
use super::transform::Transform;
use crate::path_space::PathState;

const TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clause {
    pub name: String,
    pub passed: bool,
    /// Worst observed value of the checked quantity.
    pub worst: f64,
    pub limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub problem: String,
    pub probes: usize,
    pub seed: u64,
    pub probe_radius: f64,
    pub clauses: Vec<Clause>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.clauses.iter().all(|c| c.passed)
    }

    pub fn clause(&self, name: &str) -> Option<&Clause> {
        self.clauses.iter().find(|c| c.name == name)
    }
}

fn clause_le(name: &str, worst: f64, limit: f64) -> Clause {
    Clause { name: name.into(), passed: worst <= limit + TOL * limit.abs().max(1.0), worst, limit }
}

fn clause_ge(name: &str, worst: f64, limit: f64) -> Clause {
    Clause { name: name.into(), passed: worst >= limit - TOL * limit.abs().max(1.0), worst, limit }
}

/// Random stopped-path features in the box `|x_i| ≤ radius`.
pub fn random_state(rng: &mut ChaCha8Rng, dim: usize, horizon: f64, radius: f64) -> PathState {
    let mut st = PathState::origin(rng.random_range(0.0..=horizon), dim);
    for c in 0..dim {
        let x = rng.random_range(-radius..=radius);
        st.x[c] = x;
        st.run_max[c] = x.max(rng.random_range(0.0..=radius));
        st.run_min[c] = x.min(-rng.random_range(0.0..=radius));
    }
    st
}

/// Default probe box: two standard deviations of the most volatile control.
pub fn default_radius(data: &ProblemData) -> f64 {
    (2.0 * data.controls.max_vol() * data.horizon.sqrt()).max(0.5)
}

/// Empirical check of the standing assumptions on sampled probes.
pub fn validate(data: &ProblemData, probes: usize, seed: u64) -> ValidationReport {
    let radius = default_radius(data);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = data.dim();
    let nk = data.controls.len();
    let (mut max_xi, mut max_h, mut max_f, mut max_lip) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut min_gap = f64::INFINITY;
    let zero = vec![0.0; d];
    for _ in 0..probes {
        let st = random_state(&mut rng, d, data.horizon, radius);
        max_h = max_h.max(data.h(&st).abs());
        let mut at_t = st.clone();
        at_t.t = data.horizon;
        let xi = data.xi(&at_t);
        max_xi = max_xi.max(xi.abs());
        min_gap = min_gap.min(xi - data.h(&at_t));
        let k = rng.random_range(0..nk);
        max_f = max_f.max(data.f(&st, 0.0, &zero, k).abs());

        let scale = data.m0.max(1.0);
        let y1 = rng.random_range(-scale..=scale);
        let y2 = rng.random_range(-scale..=scale);
        let z1: Vec<f64> = (0..d).map(|_| rng.random_range(-scale..=scale)).collect();
        let z2: Vec<f64> = (0..d).map(|_| rng.random_range(-scale..=scale)).collect();
        let dz: f64 = z1.iter().zip(&z2).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let denom = (y1 - y2).abs() + dz;
        if denom > 1e-12 {
            let df = (data.f(&st, y1, &z1, k) - data.f(&st, y2, &z2, k)).abs();
            max_lip = max_lip.max(df / denom);
        }
    }
    let (mut min_sv, mut max_sv) = (f64::INFINITY, 0.0f64);
    for k in 0..nk {
        let sv = data.controls.sigma(k).clone().singular_values();
        min_sv = min_sv.min(sv.min());
        max_sv = max_sv.max(sv.max());
    }
    let clauses = vec![
        clause_le("bounded_terminal", max_xi, data.m0),
        clause_le("bounded_barrier", max_h, data.m0),
        clause_le("bounded_driver", max_f, data.m0),
        clause_le("lipschitz", max_lip, data.l0),
        Clause {
            name: "nondegenerate".into(),
            passed: data.c0 > 0.0 && min_sv >= data.c0 - TOL,
            worst: min_sv,
            limit: data.c0,
        },
        clause_le("vol_bound", max_sv, (2.0 * data.l0).sqrt()),
        clause_ge("terminal_above_barrier", if probes == 0 { 0.0 } else { min_gap }, 0.0),
    ];
    ValidationReport { problem: data.name.clone(), probes, seed, probe_radius: radius, clauses }
}

/// Worst values over random probes of the two properties the transformed
/// data are built for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub probes: usize,
    /// `max (F′(y+δ) + δ − F′(y))`; must be `≤ 0`.
    pub worst_strict_decrease: f64,
    /// `min F′(h′, 0)`; must be `≥ 0`.
    pub worst_barrier_drive: f64,
}

impl MonotonicityReport {
    pub fn passed(&self) -> bool {
        self.worst_strict_decrease <= 1e-9 && self.worst_barrier_drive >= -1e-9
    }
}

/// Checks `F′(y+δ) + δ ≤ F′(y)` and `F′(h′, 0) ≥ 0` on transformed data.
pub fn monotonicity_probes(
    original: &ProblemData,
    transformed: &ProblemData,
    tr: Transform,
    probes: usize,
    seed: u64,
) -> MonotonicityReport {
    let radius = default_radius(original);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = original.dim();
    let zero = vec![0.0; d];
    let scale = transformed.m0.max(1.0);
    let mut worst_dec = f64::NEG_INFINITY;
    let mut worst_bar = f64::INFINITY;
    for _ in 0..probes {
        let st = random_state(&mut rng, d, original.horizon, radius);
        let k = rng.random_range(0..original.controls.len());
        let y = rng.random_range(-scale..=scale);
        let delta = rng.random_range(0.0..=scale);
        let z: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let gap = transformed.f(&st, y + delta, &z, k) + delta - transformed.f(&st, y, &z, k);
        worst_dec = worst_dec.max(gap);
        let hp = transformed.h(&st);
        debug_assert!((hp - tr.forward(st.t, original.h(&st))).abs() <= 1e-9 * hp.abs().max(1.0));
        worst_bar = worst_bar.min(transformed.f(&st, hp, &zero, k));
    }
    MonotonicityReport { probes, worst_strict_decrease: worst_dec, worst_barrier_drive: worst_bar }
}
