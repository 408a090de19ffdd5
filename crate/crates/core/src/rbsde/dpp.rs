use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::solution::Layout;
use super::tree::{node_state, solve_rbsde_tree, TreeOptions, TreeProblem};
use crate::error::{domain, parameter, Result};
use crate::model::ProblemData;
use crate::path_space::{PathState, TIME_EPS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DppVariant {
    /// Restart every node at the intermediate time.
    Deterministic,
    /// Restart at the exit of the ball of radius `delta`, capped at
    /// `(t + δ) ∧ t1`.
    HittingDelta { delta: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DppOptions {
    /// Steps of the direct tree on `[t, T]`.
    pub n_steps: usize,
    pub t1: f64,
    pub variant: DppVariant,
    /// Inner trees use `refine` times as many steps as the outer grid
    /// leaves, and the direct value is taken on the refined grid; `1` keeps
    /// everything on the outer grid.
    pub refine: usize,
}

impl Default for DppOptions {
    fn default() -> Self {
        Self { n_steps: 40, t1: 0.5, variant: DppVariant::Deterministic, refine: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DppReport {
    pub direct: f64,
    pub nested: f64,
    pub residual: f64,
    pub inner_solves: usize,
}

/// `|u⁰(t, ω) − sup_k Y^k_t(τ, u⁰(τ, ·))|` with the inner value from
/// re-rooted tree solves at the restart nodes.
pub fn dpp_residual(data: &ProblemData, root: &PathState, opts: &DppOptions) -> Result<DppReport> {
    let t0 = root.t;
    let big_t = data.horizon;
    if !(opts.t1 > t0 + TIME_EPS && opts.t1 <= big_t + TIME_EPS) {
        return Err(domain(format!("need t < t1 ≤ T, got t = {t0}, t1 = {}", opts.t1)));
    }
    if opts.refine == 0 || opts.n_steps == 0 {
        return Err(parameter("steps and refinement must be positive"));
    }
    let n = opts.n_steps;
    let coarse = solve_rbsde_tree(data, root, &TreeOptions::steps(n))?;
    let Layout::Tree { dx, .. } = coarse.layout else { unreachable!() };
    let dt = coarse.dt;
    // The reference sits on the finest grid the nested evaluation uses.
    let direct =
        if opts.refine == 1 { coarse } else { solve_rbsde_tree(data, root, &TreeOptions::steps(n * opts.refine))? };
    let pos = (opts.t1 - t0) / dt;
    let n1 = pos.round() as usize;
    if (pos - n1 as f64).abs() > 1e-6 || n1 == 0 {
        return Err(domain(format!("t1 = {} is not a positive grid time of the direct tree", opts.t1)));
    }

    let (n_outer, stopped): (usize, Box<dyn Fn(usize, i64) -> bool + Sync>) = match opts.variant {
        DppVariant::Deterministic => (n1, Box::new(move |i, _| i == n1)),
        DppVariant::HittingDelta { delta } => {
            if !(delta > 0.0) {
                return Err(parameter("delta must be positive"));
            }
            let cap = (t0 + delta).min(opts.t1);
            let nc = (((cap - t0) / dt) - 1e-9).ceil().max(1.0) as usize;
            let nc = nc.min(n1);
            (nc, Box::new(move |i, j| i > 0 && (i == nc || (j as f64 * dx).abs() >= delta - 1e-12)))
        }
    };

    // Restart nodes reachable from unstopped parents.
    let mut nodes = Vec::new();
    let mut alive: Vec<i64> = vec![0];
    for i in 1..=n_outer {
        let lo = alive.iter().min().unwrap() - 1;
        let hi = alive.iter().max().unwrap() + 1;
        let mut next = Vec::new();
        for j in lo..=hi {
            if stopped(i, j) {
                nodes.push((i, j));
            } else {
                next.push(j);
            }
        }
        alive = next;
        if alive.is_empty() {
            break;
        }
    }

    let x0 = root.x1();
    let inner: Vec<Result<((usize, i64), f64)>> = nodes
        .par_iter()
        .map(|&(i, j)| {
            let st = node_state(root, t0 + i as f64 * dt, x0 + j as f64 * dx);
            let left = n - i;
            let o = if opts.refine == 1 {
                TreeOptions { dx: Some(dx), ..TreeOptions::steps(left) }
            } else {
                TreeOptions::steps(left * opts.refine)
            };
            Ok(((i, j), solve_rbsde_tree(data, &st, &o)?.y0))
        })
        .collect();
    let inner: HashMap<(usize, i64), f64> = inner.into_iter().collect::<Result<_>>()?;
    let count = inner.len();
    // Stopped nodes outside the reachable set never influence the root.
    let stop = |i: usize, j: i64| stopped(i, j).then(|| inner.get(&(i, j)).copied().unwrap_or(0.0));
    let outer_opts = TreeOptions { dx: Some(dx), ..TreeOptions::steps(n_outer) };
    let nested = TreeProblem {
        data,
        root,
        t_end: t0 + n_outer as f64 * dt,
        opts: &outer_opts,
        terminal: Some(&|_: &PathState| f64::NAN),
        stop: Some(&stop),
    }
    .solve()?
    .y0;
    Ok(DppReport { direct: direct.y0, nested, residual: (direct.y0 - nested).abs(), inner_solves: count })
}
