use serde::{Deserialize, Serialize};

use super::freeze::{FrozenCell, FrozenData};
use crate::error::{parameter, Result};
use crate::model::ProblemData;
use crate::path_space::{PathState, Skeleton};
use crate::rbsde::{skorokhod_report, solve_lsmc_with, LsmcOptions, LsmcTargets};
use crate::simulate::{euler_bundle_from_state, ControlPolicy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReplayOptions {
    pub alpha: f64,
    pub n_steps: usize,
    pub n_paths: usize,
    pub seed: u64,
    pub control: usize,
    pub targets: LsmcTargets,
}

impl Default for ReplayOptions {
    fn default() -> Self {
        Self { alpha: 0.2, n_steps: 50, n_paths: 20_000, seed: 11, control: 0, targets: LsmcTargets::Regressed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplayReport {
    pub instance: String,
    pub alpha: f64,
    pub y0: f64,
    pub std_error: f64,
    /// Mean `K` mass per path.
    pub total_k_mass: f64,
    /// Share of `K` mass placed on steps with no cascade knot.
    pub off_knot_fraction: f64,
    pub max_flat_off_defect: f64,
    pub min_reflection_gap: f64,
    pub mean_knots: f64,
}

/// Discrete reflected BSDE on frozen data from the root cell, with the `K`
/// increments located against each path's cascade.
pub fn frozen_replay(data: &ProblemData, opts: &ReplayOptions) -> Result<ReplayReport> {
    if opts.n_steps == 0 || opts.n_paths < 2 {
        return Err(parameter("replay needs steps and at least two paths"));
    }
    // Capped knots land on the grid only when α is a whole number of steps.
    let per = opts.alpha * opts.n_steps as f64 / data.horizon;
    if (per - per.round()).abs() > 1e-9 || per.round() < 1.0 {
        return Err(parameter("α must be a positive whole number of replay steps"));
    }
    let cell = FrozenCell::new(Skeleton::root(0.0, 1), opts.alpha)?;
    let policy = ControlPolicy::constant(opts.control);
    let base = PathState::origin(0.0, 1);
    let bundle = euler_bundle_from_state(data, &base, &policy, opts.n_steps, opts.n_paths, opts.seed, true)?;
    let fd = FrozenData::new(data, &cell, &bundle)?;
    let lsmc = LsmcOptions { keep_paths: true, targets: opts.targets, ..LsmcOptions::default() };
    let sol = solve_lsmc_with(&fd, data, &bundle, &lsmc)?;
    let cascades = fd.cascades();
    let sk = skorokhod_report(&sol, Some(&cascades))?;
    Ok(ReplayReport {
        instance: data.name.clone(),
        alpha: opts.alpha,
        y0: sol.y0,
        std_error: sol.std_error,
        total_k_mass: sk.total_k_mass,
        off_knot_fraction: sk.off_knot_fraction.unwrap_or(0.0),
        max_flat_off_defect: sk.max_flat_off_defect,
        min_reflection_gap: sk.min_reflection_gap,
        mean_knots: cascades.iter().map(|c| c.len() as f64).sum::<f64>() / cascades.len() as f64,
    })
}
